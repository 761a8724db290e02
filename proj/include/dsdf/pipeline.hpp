#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsdf/checkpoint.hpp"
#include "dsdf/dataset.hpp"
#include "dsdf/diffusion.hpp"
#include "dsdf/metrics.hpp"
#include "dsdf/modulation.hpp"
#include "dsdf/tensor.hpp"

namespace dsdf {

struct TrainConfig {
    std::string phase;  // modulation | diffusion | finetune
    std::string data_dir;
    std::string latent_file;
    uint64_t seed = 7;
    int steps = 2000;
    int batch_shapes = 8;
    int queries_per_shape = 1024;
    double near_fraction = 0.7;
    double noise_std = 0.05;
    double lr = 1e-4;
    double lr_final = 0.0;  // > 0 enables geometric lr annealing toward this value
    double kl_beta = 1e-5;
    double prior_std = 0.25;
    double dropout_p = 0.8;
    double omega = 0.0;
    int log_every = 50;
    // dims
    ModulationConfig modulation;
    DenoiserConfig denoiser;
    int condition_hidden = 64;
    int condition_points = 128;  // sampled from the full cloud before cropping
    // schedule
    int T = 500;
    double beta1 = 1e-4, betaT = 0.02;
    // fine-tune freezes
    bool freeze_modulation = false;
    bool freeze_diffusion = false;
    double target_l1 = 0.05;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["phase"] = phase;
        j["data_dir"] = data_dir;
        j["latent_file"] = latent_file;
        j["seed"] = seed;
        j["steps"] = steps;
        j["batch_shapes"] = batch_shapes;
        j["queries_per_shape"] = queries_per_shape;
        j["near_fraction"] = near_fraction;
        j["noise_std"] = noise_std;
        j["lr"] = lr;
        j["lr_final"] = lr_final;
        j["kl_beta"] = kl_beta;
        j["prior_std"] = prior_std;
        j["dropout_p"] = dropout_p;
        j["omega"] = omega;
        j["log_every"] = log_every;
        j["feature_dim"] = modulation.feature_dim;
        j["latent_dim"] = modulation.latent_dim;
        j["point_hidden"] = modulation.point_hidden;
        j["vae_hidden"] = modulation.vae_hidden;
        j["sdf_hidden"] = modulation.sdf_hidden;
        j["sdf_layers"] = modulation.sdf_layers;
        j["model_dim"] = denoiser.model_dim;
        j["time_dim"] = denoiser.time_dim;
        j["blocks"] = denoiser.blocks;
        j["ff_hidden"] = denoiser.ff_hidden;
        j["condition_hidden"] = condition_hidden;
        j["condition_points"] = condition_points;
        j["T"] = T;
        j["beta_1"] = beta1;
        j["beta_T"] = betaT;
        j["freeze_modulation"] = freeze_modulation;
        j["freeze_diffusion"] = freeze_diffusion;
        j["target_l1"] = target_l1;
        return j;
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        auto get = [&](const char* k, auto& dst) {
            if (j.contains(k)) dst = j.at(k).template get<std::decay_t<decltype(dst)>>();
        };
        get("phase", c.phase);
        get("data_dir", c.data_dir);
        get("latent_file", c.latent_file);
        get("seed", c.seed);
        get("steps", c.steps);
        get("batch_shapes", c.batch_shapes);
        get("queries_per_shape", c.queries_per_shape);
        get("near_fraction", c.near_fraction);
        get("noise_std", c.noise_std);
        get("lr", c.lr);
        get("lr_final", c.lr_final);
        get("kl_beta", c.kl_beta);
        get("prior_std", c.prior_std);
        get("dropout_p", c.dropout_p);
        get("omega", c.omega);
        get("log_every", c.log_every);
        get("feature_dim", c.modulation.feature_dim);
        get("latent_dim", c.modulation.latent_dim);
        get("point_hidden", c.modulation.point_hidden);
        get("vae_hidden", c.modulation.vae_hidden);
        get("sdf_hidden", c.modulation.sdf_hidden);
        get("sdf_layers", c.modulation.sdf_layers);
        get("model_dim", c.denoiser.model_dim);
        get("time_dim", c.denoiser.time_dim);
        get("blocks", c.denoiser.blocks);
        get("ff_hidden", c.denoiser.ff_hidden);
        get("condition_hidden", c.condition_hidden);
        get("condition_points", c.condition_points);
        get("T", c.T);
        get("beta_1", c.beta1);
        get("beta_T", c.betaT);
        get("freeze_modulation", c.freeze_modulation);
        get("freeze_diffusion", c.freeze_diffusion);
        get("target_l1", c.target_l1);
        c.denoiser.latent_dim = c.modulation.latent_dim;
        c.denoiser.condition_dim = c.modulation.feature_dim;
        return c;
    }

    void sync_dims() {
        denoiser.latent_dim = modulation.latent_dim;
        denoiser.condition_dim = modulation.feature_dim;
    }
};

struct LossLog {
    std::vector<std::pair<int, double>> entries;

    void save(const std::string& path) const {
        std::ofstream f(path);
        f << "step,loss\n";
        f.precision(17);
        for (const auto& [s, l] : entries) f << s << "," << l << "\n";
    }
};

struct TrainResult {
    double final_loss = 0.0;
    double final_l1 = 0.0;
    int steps_run = 0;
    LossLog log;
    bool aborted_non_finite = false;
};

// ---------------------------------------------------------------------------
// Phase 1: joint SDF-VAE training.

// Geometric lr schedule from cfg.lr down to cfg.lr_final (off when lr_final <= 0).
inline double annealed_lr(const TrainConfig& cfg, int step) {
    if (cfg.lr_final <= 0.0 || cfg.steps <= 1) return cfg.lr;
    double f = static_cast<double>(step) / (cfg.steps - 1);
    return cfg.lr * std::pow(cfg.lr_final / cfg.lr, f);
}

inline TrainResult train_modulation(ModulationModel& model, const std::vector<ShapeEntry>& shapes,
                                    const TrainConfig& cfg, Optimizer& opt) {
    if (shapes.empty()) throw std::invalid_argument("train_modulation: empty dataset");
    TrainResult res;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng::with_stream(cfg.seed, 0x10000000ull + step);
        opt.set_lr(annealed_lr(cfg, step));
        GradientTape tape;
        model.params.watch_all(tape);
        TapeScope scope(tape);
        Tensor total = Tensor::scalar(0.0);
        double l1_acc = 0.0;
        for (int b = 0; b < cfg.batch_shapes; ++b) {
            const ShapeEntry& e = shapes[rng.index(shapes.size())];
            SDFSampleSet qs = sample_queries(e.spec, cfg.queries_per_shape, cfg.near_fraction,
                                             cfg.noise_std, rng);
            std::vector<double> qd;
            qd.reserve(qs.queries.size() * 3);
            for (const auto& q : qs.queries) qd.insert(qd.end(), q.begin(), q.end());
            Tensor queries({static_cast<int>(qs.queries.size()), 3}, std::move(qd));
            Tensor gt({static_cast<int>(qs.distances.size())}, qs.distances);
            auto parts = modulation_loss(model, e.cloud, queries, gt, cfg.kl_beta, &rng,
                                         cfg.prior_std);
            total = add(total, parts.total);
            l1_acc += parts.l1.item();
        }
        total = mul_scalar(total, 1.0 / cfg.batch_shapes);
        double loss = total.item();
        if (!std::isfinite(loss)) {
            res.aborted_non_finite = true;
            break;
        }
        tape.backward(total);
        opt.step(model.params, tape);
        res.final_loss = loss;
        res.final_l1 = l1_acc / cfg.batch_shapes;
        res.steps_run = step + 1;
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
            res.log.entries.push_back({step, loss});
    }
    return res;
}

// Deterministic (posterior-mean) latent per shape.
inline std::vector<std::vector<double>> extract_latents(const ModulationModel& model,
                                                        const std::vector<ShapeEntry>& shapes) {
    std::vector<std::vector<double>> latents;
    latents.reserve(shapes.size());
    for (const auto& e : shapes) {
        Tensor pi = model.encode(e.cloud);
        auto post = model.vae_encode(pi, nullptr);
        latents.push_back(post.z.data());
    }
    return latents;
}

inline void save_latent_dataset(const std::string& latent_path, const std::string& manifest_path,
                                const std::vector<std::vector<double>>& latents,
                                const std::vector<ShapeEntry>& shapes,
                                const std::string& data_dir) {
    save_latents(latent_path, latents);
    nlohmann::json manifest;
    manifest["latents"] = latent_path;
    manifest["data_dir"] = data_dir;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : shapes)
        arr.push_back({{"id", e.id}, {"cloud", "clouds/" + e.id + ".xyz"}});
    manifest["shapes"] = arr;
    std::ofstream f(manifest_path);
    f << manifest.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Phase 2: latent diffusion training (conditional when shapes provided).

// Online partial-view condition: subsample `condition_points` from the full cloud,
// crop half away from a random viewpoint.
inline PointCloud make_partial(const PointCloud& full, int condition_points, Rng& rng) {
    PointCloud sub;
    sub.points.reserve(condition_points);
    for (int i = 0; i < condition_points; ++i)
        sub.points.push_back(full.points[rng.index(full.points.size())]);
    return crop_partial(sub, rng);
}

inline TrainResult train_diffusion(DenoiserModel& model, ConditionEncoder* cond_encoder,
                                   const std::vector<std::vector<double>>& latents,
                                   const std::vector<ShapeEntry>* shapes,
                                   const DiffusionSchedule& schedule, const TrainConfig& cfg,
                                   Optimizer& opt) {
    if (latents.empty()) throw std::invalid_argument("train_diffusion: no latents");
    bool conditional = cond_encoder != nullptr && shapes != nullptr;
    if (conditional && shapes->size() != latents.size())
        throw std::invalid_argument("train_diffusion: latent/shape count mismatch");
    TrainResult res;
    int d = model.config().latent_dim;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng::with_stream(cfg.seed, 0x20000000ull + step);
        opt.set_lr(annealed_lr(cfg, step));
        GradientTape tape;
        model.params.watch_all(tape);
        if (conditional) cond_encoder->params.watch_all(tape);
        TapeScope scope(tape);
        Tensor total = Tensor::scalar(0.0);
        for (int b = 0; b < cfg.batch_shapes; ++b) {
            size_t idx = rng.index(latents.size());
            Tensor z0({d}, latents[idx]);
            int t = 1 + static_cast<int>(rng.index(schedule.T));
            Tensor eps = Tensor::randn({d}, rng);
            Tensor condition = zero_mask(model.config().condition_dim);
            if (conditional && rng.uniform() >= cfg.dropout_p) {
                PointCloud partial = make_partial((*shapes)[idx].cloud, cfg.condition_points, rng);
                condition = cond_encoder->encode(partial);
            }
            total = add(total, diffusion_loss(model, z0, t, eps, schedule, condition));
        }
        total = mul_scalar(total, 1.0 / cfg.batch_shapes);
        double loss = total.item();
        if (!std::isfinite(loss)) {
            res.aborted_non_finite = true;
            break;
        }
        tape.backward(total);
        std::vector<ParamStore*> stores{&model.params};
        if (conditional) stores.push_back(&cond_encoder->params);
        opt.step(stores, tape);
        res.final_loss = loss;
        res.steps_run = step + 1;
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
            res.log.entries.push_back({step, loss});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Phase 3: end-to-end fine-tune, total = L_mod + L_c-diff + L1(Phi(x|z')).
// z' is the one-step prediction zhat0 from a fresh (t, eps).

struct FinetuneLossParts {
    double total, l_mod, l_diff, l_geo;
};

inline TrainResult finetune_end_to_end(ModulationModel& mod, DenoiserModel& den,
                                       ConditionEncoder& cond_encoder,
                                       const std::vector<ShapeEntry>& shapes,
                                       const DiffusionSchedule& schedule, const TrainConfig& cfg,
                                       Optimizer& opt,
                                       std::vector<FinetuneLossParts>* parts_log = nullptr) {
    TrainResult res;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng::with_stream(cfg.seed, 0x30000000ull + step);
        opt.set_lr(annealed_lr(cfg, step));
        GradientTape tape;
        mod.params.watch_all(tape);
        den.params.watch_all(tape);
        cond_encoder.params.watch_all(tape);
        TapeScope scope(tape);
        Tensor total = Tensor::scalar(0.0);
        double lm_acc = 0, ld_acc = 0, lg_acc = 0;
        for (int b = 0; b < cfg.batch_shapes; ++b) {
            const ShapeEntry& e = shapes[rng.index(shapes.size())];
            SDFSampleSet qs = sample_queries(e.spec, cfg.queries_per_shape, cfg.near_fraction,
                                             cfg.noise_std, rng);
            std::vector<double> qd;
            for (const auto& q : qs.queries) qd.insert(qd.end(), q.begin(), q.end());
            Tensor queries({static_cast<int>(qs.queries.size()), 3}, std::move(qd));
            Tensor gt({static_cast<int>(qs.distances.size())}, qs.distances);

            // L_mod with the live encoder latent
            Tensor pi = mod.encode(e.cloud);
            auto post = mod.vae_encode(pi, &rng);
            Tensor pred = mod.sdf_decode(queries, post.z);
            Tensor l_mod = add(mean(abs(sub(pred, gt))),
                               mul_scalar(kl_to_prior(post.mu, post.logvar, cfg.prior_std),
                                          cfg.kl_beta));

            // conditional diffusion loss on the live latent
            int t = 1 + static_cast<int>(rng.index(schedule.T));
            Tensor eps = Tensor::randn({mod.config().latent_dim}, rng);
            Tensor condition = zero_mask(den.config().condition_dim);
            if (rng.uniform() >= cfg.dropout_p) {
                PointCloud partial = make_partial(e.cloud, cfg.condition_points, rng);
                condition = cond_encoder.encode(partial);
            }
            Tensor z_t = q_sample(post.z, t, eps, schedule);
            Tensor zhat0 = den.denoise(z_t, t, condition);
            Tensor dz = sub(zhat0, post.z);
            Tensor l_diff = mean(mul(dz, dz));

            // geometric constraint on the denoised latent
            Tensor pred2 = mod.sdf_decode(queries, zhat0);
            Tensor l_geo = mean(abs(sub(pred2, gt)));

            total = add(total, add(add(l_mod, l_diff), l_geo));
            lm_acc += l_mod.item();
            ld_acc += l_diff.item();
            lg_acc += l_geo.item();
        }
        total = mul_scalar(total, 1.0 / cfg.batch_shapes);
        double loss = total.item();
        if (!std::isfinite(loss)) {
            res.aborted_non_finite = true;
            break;
        }
        tape.backward(total);
        std::vector<ParamStore*> stores;
        if (!cfg.freeze_modulation) stores.push_back(&mod.params);
        if (!cfg.freeze_diffusion) {
            stores.push_back(&den.params);
            stores.push_back(&cond_encoder.params);
        }
        if (stores.empty()) throw std::invalid_argument("finetune: both modules frozen");
        opt.step(stores, tape);
        res.final_loss = loss;
        res.steps_run = step + 1;
        if (parts_log)
            parts_log->push_back({loss, lm_acc / cfg.batch_shapes, ld_acc / cfg.batch_shapes,
                                  lg_acc / cfg.batch_shapes});
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps)
            res.log.entries.push_back({step, loss});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Generation + CONS filtering.

struct Generation {
    std::vector<double> latent;
    Mesh mesh;   // empty when no iso-surface was found
    double cons = 0.0;
    bool mesh_empty = false;
};

inline std::vector<Generation> generate(const ModulationModel& mod, const DenoiserModel& den,
                                        const ConditionEncoder* cond_encoder,
                                        const DiffusionSchedule& schedule,
                                        const PointCloud* condition_cloud, int n, int resolution,
                                        double omega, uint64_t seed) {
    std::vector<Generation> out;
    Tensor condition = zero_mask(den.config().condition_dim);
    if (condition_cloud && cond_encoder) condition = cond_encoder->encode(*condition_cloud);
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::with_stream(seed, 0x40000000ull + i);
        Generation g;
        SampleOptions opt;
        opt.omega = omega;
        g.latent = sample_latent(den, schedule, condition, rng, opt);
        g.mesh = reconstruct_mesh(mod, g.latent, resolution);
        g.mesh_empty = g.mesh.empty();
        if (condition_cloud) {
            std::vector<double> s = mod.sdf_values(condition_cloud->points, g.latent);
            double acc = 0;
            for (double v : s) acc += std::fabs(v);
            g.cons = acc / s.size();
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline std::vector<Generation> filter_by_cons(const std::vector<Generation>& gens,
                                              double threshold) {
    std::vector<Generation> out;
    for (const auto& g : gens)
        if (g.cons <= threshold) out.push_back(g);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint save/load with config snapshot, phase tag and step counter.

inline void save_checkpoint(const std::string& path, const ParamStore& params,
                            const TrainConfig& cfg, const std::string& phase, int step) {
    nlohmann::json meta;
    meta["config"] = cfg.to_json();
    meta["phase"] = phase;
    meta["step"] = step;
    save_params(path, params, meta.dump());
}

inline void save_checkpoint(const std::string& path,
                            const std::vector<const ParamStore*>& stores,
                            const TrainConfig& cfg, const std::string& phase, int step) {
    nlohmann::json meta;
    meta["config"] = cfg.to_json();
    meta["phase"] = phase;
    meta["step"] = step;
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (const auto* s : stores)
        for (size_t i = 0; i < s->size(); ++i) entries.emplace_back(s->names()[i], &s->at(i));
    save_tensor_table(path, entries, meta.dump());
}

inline nlohmann::json load_checkpoint(const std::string& path,
                                      const std::vector<ParamStore*>& stores) {
    TensorTable table = load_tensor_table(path);
    for (auto* s : stores)
        for (size_t i = 0; i < s->size(); ++i) {
            const std::string& name = s->names()[i];
            auto it = table.tensors.find(name);
            if (it == table.tensors.end())
                throw std::runtime_error("load_checkpoint: missing tensor " + name);
            s->at(i).mutable_data() = it->second.data();
        }
    return nlohmann::json::parse(table.meta_json.empty() ? "{}" : table.meta_json);
}

}  // namespace dsdf
