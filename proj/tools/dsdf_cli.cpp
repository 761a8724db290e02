// Command-line front end for the full pipeline: dataset generation, the three
// training phases, sampling, completion, evaluation and meshing.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad usage.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsdf/pipeline.hpp"

using namespace dsdf;
namespace fs = std::filesystem;

namespace {

void write_sidecar(const std::string& main_output, const nlohmann::json& j) {
    fs::path p(main_output);
    fs::path side = fs::is_directory(p) || p.extension().empty()
                        ? p / "config.json"
                        : fs::path(main_output + ".config.json");
    if (side.has_parent_path()) fs::create_directories(side.parent_path());
    std::ofstream f(side);
    f << j.dump(2) << "\n";
    std::cout << j.dump(2) << std::endl;
}

struct LoadedModulation {
    TrainConfig cfg;
    std::unique_ptr<ModulationModel> model;
};

LoadedModulation load_modulation_ckpt(const std::string& path) {
    TensorTable table = load_tensor_table(path);
    auto meta = nlohmann::json::parse(table.meta_json);
    LoadedModulation out;
    out.cfg = TrainConfig::from_json(meta.at("config"));
    Rng rng(0);
    out.model = std::make_unique<ModulationModel>(out.cfg.modulation, rng);
    load_checkpoint(path, {&out.model->params});
    return out;
}

struct LoadedDiffusion {
    TrainConfig cfg;
    std::unique_ptr<DenoiserModel> model;
    std::unique_ptr<ConditionEncoder> cond_encoder;  // null for unconditional
};

LoadedDiffusion load_diffusion_ckpt(const std::string& path) {
    TensorTable table = load_tensor_table(path);
    auto meta = nlohmann::json::parse(table.meta_json);
    LoadedDiffusion out;
    out.cfg = TrainConfig::from_json(meta.at("config"));
    Rng rng(0);
    out.model = std::make_unique<DenoiserModel>(out.cfg.denoiser, rng);
    std::vector<ParamStore*> stores{&out.model->params};
    if (table.tensors.count("cond.l1.w")) {
        out.cond_encoder = std::make_unique<ConditionEncoder>(
            out.cfg.condition_hidden, out.cfg.denoiser.condition_dim, rng);
        stores.push_back(&out.cond_encoder->params);
    }
    load_checkpoint(path, stores);
    return out;
}

std::vector<PointCloud> load_cloud_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".xyz") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<PointCloud> clouds;
    for (const auto& p : paths) {
        PointCloud pc = load_xyz(p);
        if (!pc.points.empty()) clouds.push_back(std::move(pc));
    }
    if (clouds.empty()) throw std::runtime_error("no non-empty .xyz clouds in " + dir);
    return clouds;
}

PointCloud subsampled(const PointCloud& pc, int n, Rng& rng) {
    if (n <= 0 || pc.points.size() <= static_cast<size_t>(n)) return pc;
    PointCloud out;
    out.points.reserve(n);
    for (int i = 0; i < n; ++i) out.points.push_back(pc.points[rng.index(pc.points.size())]);
    return out;
}

// options shared by the training subcommands
void add_dim_options(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--feature-dim", cfg.modulation.feature_dim);
    cmd->add_option("--latent-dim", cfg.modulation.latent_dim);
    cmd->add_option("--point-hidden", cfg.modulation.point_hidden);
    cmd->add_option("--vae-hidden", cfg.modulation.vae_hidden);
    cmd->add_option("--sdf-hidden", cfg.modulation.sdf_hidden);
    cmd->add_option("--sdf-layers", cfg.modulation.sdf_layers);
}

void add_schedule_options(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--T", cfg.T);
    cmd->add_option("--beta1", cfg.beta1);
    cmd->add_option("--betaT", cfg.betaT);
}

int run_gen_data(const std::string& out_dir, int n_train, int n_test, int points,
                 uint64_t seed) {
    Dataset ds = generate_dataset(n_train, n_test, points, seed);
    save_dataset(ds, out_dir);
    nlohmann::json j{{"command", "gen-data"}, {"out", out_dir},      {"train", n_train},
                     {"test", n_test},       {"points", points},    {"seed", seed}};
    write_sidecar(out_dir, j);
    return 0;
}

int run_train_mod(const std::string& data_dir, const std::string& out, TrainConfig cfg) {
    cfg.phase = "modulation";
    cfg.data_dir = data_dir;
    cfg.sync_dims();
    Dataset ds = load_dataset(data_dir);
    Rng rng(cfg.seed);
    ModulationModel model(cfg.modulation, rng);
    Optimizer opt(cfg.lr);
    TrainResult res = train_modulation(model, ds.train, cfg, opt);
    if (res.aborted_non_finite) throw std::runtime_error("train-mod: loss went non-finite");
    save_checkpoint(out, model.params, cfg, cfg.phase, res.steps_run);
    res.log.save(out + ".loss.csv");
    nlohmann::json j = cfg.to_json();
    j["command"] = "train-mod";
    j["final_loss"] = res.final_loss;
    j["final_l1"] = res.final_l1;
    write_sidecar(out, j);
    return 0;
}

int run_extract_latents(const std::string& data_dir, const std::string& ckpt,
                        const std::string& out) {
    auto mod = load_modulation_ckpt(ckpt);
    Dataset ds = load_dataset(data_dir);
    auto latents = extract_latents(*mod.model, ds.train);
    save_latent_dataset(out, out + ".manifest.json", latents, ds.train, data_dir);
    nlohmann::json j{{"command", "extract-latents"},
                     {"data", data_dir},
                     {"ckpt", ckpt},
                     {"out", out},
                     {"count", latents.size()},
                     {"latent_dim", latents.empty() ? 0 : latents[0].size()}};
    write_sidecar(out, j);
    return 0;
}

int run_train_diff(const std::string& latent_file, const std::string& mod_ckpt,
                   const std::string& data_dir, const std::string& out, bool unconditional,
                   TrainConfig cfg) {
    auto mod = load_modulation_ckpt(mod_ckpt);
    cfg.phase = "diffusion";
    cfg.latent_file = latent_file;
    cfg.data_dir = data_dir;
    cfg.modulation = mod.cfg.modulation;
    cfg.sync_dims();
    auto latents = load_latents(latent_file);
    if (latents.empty() || static_cast<int>(latents[0].size()) != cfg.modulation.latent_dim)
        throw std::runtime_error("train-diff: latent dim does not match the modulation model");
    DiffusionSchedule schedule = make_schedule(cfg.T, cfg.beta1, cfg.betaT);
    Rng rng(cfg.seed);
    DenoiserModel den(cfg.denoiser, rng);
    std::unique_ptr<ConditionEncoder> cond;
    Dataset ds;
    std::vector<ShapeEntry>* shapes = nullptr;
    if (!unconditional) {
        if (data_dir.empty())
            throw std::runtime_error("train-diff: conditional training needs --data");
        ds = load_dataset(data_dir);
        if (ds.train.size() != latents.size())
            throw std::runtime_error("train-diff: latent/shape count mismatch");
        cond = std::make_unique<ConditionEncoder>(cfg.condition_hidden,
                                                  cfg.denoiser.condition_dim, rng);
        shapes = &ds.train;
    }
    Optimizer opt(cfg.lr);
    TrainResult res = train_diffusion(den, cond.get(), latents, shapes, schedule, cfg, opt);
    if (res.aborted_non_finite) throw std::runtime_error("train-diff: loss went non-finite");
    std::vector<const ParamStore*> stores{&den.params};
    if (cond) stores.push_back(&cond->params);
    save_checkpoint(out, stores, cfg, cfg.phase, res.steps_run);
    res.log.save(out + ".loss.csv");
    nlohmann::json j = cfg.to_json();
    j["command"] = "train-diff";
    j["conditional"] = !unconditional;
    j["final_loss"] = res.final_loss;
    write_sidecar(out, j);
    return 0;
}

int run_finetune(const std::string& data_dir, const std::string& mod_ckpt,
                 const std::string& diff_ckpt, const std::string& out, TrainConfig cfg) {
    auto mod = load_modulation_ckpt(mod_ckpt);
    auto diff = load_diffusion_ckpt(diff_ckpt);
    if (!diff.cond_encoder)
        throw std::runtime_error("finetune: needs a conditional diffusion checkpoint");
    cfg.phase = "finetune";
    cfg.data_dir = data_dir;
    cfg.modulation = mod.cfg.modulation;
    cfg.denoiser = diff.cfg.denoiser;
    cfg.condition_hidden = diff.cfg.condition_hidden;
    cfg.T = diff.cfg.T;
    cfg.beta1 = diff.cfg.beta1;
    cfg.betaT = diff.cfg.betaT;
    Dataset ds = load_dataset(data_dir);
    DiffusionSchedule schedule = make_schedule(cfg.T, cfg.beta1, cfg.betaT);
    Optimizer opt(cfg.lr);
    TrainResult res = finetune_end_to_end(*mod.model, *diff.model, *diff.cond_encoder, ds.train,
                                          schedule, cfg, opt);
    if (res.aborted_non_finite) throw std::runtime_error("finetune: loss went non-finite");
    save_checkpoint(out,
                    std::vector<const ParamStore*>{&mod.model->params, &diff.model->params,
                                                   &diff.cond_encoder->params},
                    cfg, cfg.phase, res.steps_run);
    res.log.save(out + ".loss.csv");
    nlohmann::json j = cfg.to_json();
    j["command"] = "finetune";
    j["final_loss"] = res.final_loss;
    write_sidecar(out, j);
    return 0;
}

void write_generations(const std::vector<Generation>& gens, const std::string& out_dir,
                       const char* stem, int cloud_points, uint64_t seed,
                       nlohmann::json& summary) {
    fs::create_directories(fs::path(out_dir) / "clouds");
    std::vector<std::vector<double>> latents;
    for (size_t i = 0; i < gens.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%03zu", stem, i);
        const Generation& g = gens[i];
        latents.push_back(g.latent);
        nlohmann::json item{{"name", name},
                            {"mesh_empty", g.mesh_empty},
                            {"cons", g.cons},
                            {"vertices", g.mesh.vertices.size()},
                            {"triangles", g.mesh.triangles.size()}};
        if (!g.mesh_empty) {
            save_obj(g.mesh, (fs::path(out_dir) / (std::string(name) + ".obj")).string());
            if (cloud_points > 0) {
                Rng rng = Rng::with_stream(seed, 0x60000000ull + i);
                PointCloud pc = mesh_sample_points(g.mesh, cloud_points, rng);
                save_xyz(pc, (fs::path(out_dir) / "clouds" / (std::string(name) + ".xyz")).string());
            }
        }
        summary["items"].push_back(item);
    }
    save_latents((fs::path(out_dir) / "latents.dsdf").string(), latents);
}

int run_sample(const std::string& mod_ckpt, const std::string& diff_ckpt,
               const std::string& out_dir, int n, int resolution, double omega, int cloud_points,
               uint64_t seed) {
    auto mod = load_modulation_ckpt(mod_ckpt);
    auto diff = load_diffusion_ckpt(diff_ckpt);
    DiffusionSchedule schedule = make_schedule(diff.cfg.T, diff.cfg.beta1, diff.cfg.betaT);
    auto gens = generate(*mod.model, *diff.model, nullptr, schedule, nullptr, n, resolution,
                         omega, seed);
    fs::create_directories(out_dir);
    nlohmann::json summary{{"command", "sample"}, {"n", n},     {"resolution", resolution},
                           {"omega", omega},      {"seed", seed}};
    summary["items"] = nlohmann::json::array();
    write_generations(gens, out_dir, "sample", cloud_points, seed, summary);
    std::ofstream f(fs::path(out_dir) / "summary.json");
    f << summary.dump(2) << "\n";
    write_sidecar(out_dir, summary);
    return 0;
}

int run_complete(const std::string& mod_ckpt, const std::string& diff_ckpt,
                 const std::string& cloud_path, const std::string& out_dir, int n, int resolution,
                 double omega, bool raw_partial, int condition_points, int cloud_points,
                 uint64_t seed) {
    auto mod = load_modulation_ckpt(mod_ckpt);
    auto diff = load_diffusion_ckpt(diff_ckpt);
    if (!diff.cond_encoder)
        throw std::runtime_error("complete: needs a conditional diffusion checkpoint");
    DiffusionSchedule schedule = make_schedule(diff.cfg.T, diff.cfg.beta1, diff.cfg.betaT);
    PointCloud input = load_xyz(cloud_path);
    PointCloud partial = input;
    if (!raw_partial) {
        Rng rng = Rng::with_stream(seed, 0x50000000ull);
        partial = make_partial(input, condition_points, rng);
    }
    fs::create_directories(out_dir);
    save_xyz(partial, (fs::path(out_dir) / "partial.xyz").string());
    auto gens = generate(*mod.model, *diff.model, diff.cond_encoder.get(), schedule, &partial, n,
                         resolution, omega, seed);
    nlohmann::json summary{{"command", "complete"},
                           {"cloud", cloud_path},
                           {"n", n},
                           {"resolution", resolution},
                           {"omega", omega},
                           {"raw_partial", raw_partial},
                           {"condition_points", condition_points},
                           {"partial_points", partial.points.size()},
                           {"seed", seed}};
    summary["items"] = nlohmann::json::array();
    write_generations(gens, out_dir, "completion", cloud_points, seed, summary);
    std::ofstream f(fs::path(out_dir) / "summary.json");
    f << summary.dump(2) << "\n";
    write_sidecar(out_dir, summary);
    return 0;
}

int run_eval(const std::string& gen_dir, const std::string& ref_dir, const std::string& out,
             int repeats, int subsample, uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    auto gen_full = load_cloud_dir(gen_dir);
    auto ref_full = load_cloud_dir(ref_dir);
    nlohmann::json runs = nlohmann::json::array();
    double best_mmd = std::numeric_limits<double>::infinity();
    nlohmann::json best;
    for (int r = 0; r < std::max(1, repeats); ++r) {
        Rng rng = Rng::with_stream(seed, 0x70000000ull + r);
        std::vector<PointCloud> gen, ref;
        for (const auto& pc : gen_full) gen.push_back(subsampled(pc, subsample, rng));
        for (const auto& pc : ref_full) ref.push_back(subsampled(pc, subsample, rng));
        nlohmann::json run;
        run["repeat"] = r;
        run["mmd"] = mmd(gen, ref);
        run["cov"] = cov(gen, ref);
        if (gen.size() == ref.size()) run["1-nna"] = one_nna(gen, ref);
        runs.push_back(run);
        if (run["mmd"] < best_mmd) {
            best_mmd = run["mmd"];
            best = run;
        }
    }
    EvalReport report;
    report.n_generated = static_cast<int>(gen_full.size());
    report.n_reference = static_cast<int>(ref_full.size());
    report.seed = seed;
    for (auto& [k, v] : best.items())
        if (k != "repeat") report.metrics.emplace_back(k, v.get<double>());
    report.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json j = report.to_json();
    j["command"] = "eval";
    j["repeats"] = std::max(1, repeats);
    j["subsample"] = subsample;
    j["best_repeat"] = best["repeat"];
    j["runs"] = runs;
    std::ofstream f(out);
    f << j.dump(2) << "\n";
    write_sidecar(out, j);
    return 0;
}

int run_mesh(const std::string& mod_ckpt, const std::string& latent_file, int index,
             int resolution, const std::string& out) {
    auto mod = load_modulation_ckpt(mod_ckpt);
    auto latents = load_latents(latent_file);
    if (index < 0 || static_cast<size_t>(index) >= latents.size())
        throw std::runtime_error("mesh: latent index out of range");
    Mesh mesh = reconstruct_mesh(*mod.model, latents[index], resolution);
    if (mesh.empty()) throw std::runtime_error("mesh: no iso-surface found");
    save_obj(mesh, out);
    nlohmann::json j{{"command", "mesh"},      {"ckpt", mod_ckpt},
                     {"latents", latent_file}, {"index", index},
                     {"resolution", resolution}, {"out", out},
                     {"vertices", mesh.vertices.size()}, {"triangles", mesh.triangles.size()}};
    write_sidecar(out, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shape-generation pipeline: SDF modulation, latent diffusion, evaluation"};
    app.require_subcommand(1);

    int rc = 0;

    // gen-data
    std::string gd_out;
    int gd_train = 200, gd_test = 32, gd_points = 2048;
    uint64_t gd_seed = 7;
    auto* gen_data = app.add_subcommand("gen-data", "Generate an analytic shape dataset");
    gen_data->add_option("--out", gd_out)->required();
    gen_data->add_option("--train", gd_train);
    gen_data->add_option("--test", gd_test);
    gen_data->add_option("--points", gd_points);
    gen_data->add_option("--seed", gd_seed);
    gen_data->callback([&] { rc = run_gen_data(gd_out, gd_train, gd_test, gd_points, gd_seed); });

    // train-mod
    std::string tm_data, tm_out;
    TrainConfig tm_cfg;
    auto* train_mod = app.add_subcommand("train-mod", "Train the SDF modulation stage");
    train_mod->add_option("--data", tm_data)->required();
    train_mod->add_option("--out", tm_out)->required();
    train_mod->add_option("--steps", tm_cfg.steps);
    train_mod->add_option("--batch", tm_cfg.batch_shapes);
    train_mod->add_option("--queries", tm_cfg.queries_per_shape);
    train_mod->add_option("--near-fraction", tm_cfg.near_fraction);
    train_mod->add_option("--noise-std", tm_cfg.noise_std);
    train_mod->add_option("--lr", tm_cfg.lr);
    train_mod->add_option("--lr-final", tm_cfg.lr_final);
    train_mod->add_option("--kl-beta", tm_cfg.kl_beta);
    train_mod->add_option("--prior-std", tm_cfg.prior_std);
    train_mod->add_option("--seed", tm_cfg.seed);
    train_mod->add_option("--log-every", tm_cfg.log_every);
    add_dim_options(train_mod, tm_cfg);
    train_mod->callback([&] { rc = run_train_mod(tm_data, tm_out, tm_cfg); });

    // extract-latents
    std::string el_data, el_ckpt, el_out;
    auto* extract = app.add_subcommand("extract-latents",
                                       "Extract posterior-mean latents for a dataset");
    extract->add_option("--data", el_data)->required();
    extract->add_option("--ckpt", el_ckpt)->required();
    extract->add_option("--out", el_out)->required();
    extract->callback([&] { rc = run_extract_latents(el_data, el_ckpt, el_out); });

    // train-diff
    std::string td_latents, td_mod, td_data, td_out;
    bool td_uncond = false;
    TrainConfig td_cfg;
    auto* train_diff = app.add_subcommand("train-diff", "Train the latent diffusion stage");
    train_diff->add_option("--latents", td_latents)->required();
    train_diff->add_option("--mod-ckpt", td_mod)->required();
    train_diff->add_option("--data", td_data);
    train_diff->add_option("--out", td_out)->required();
    train_diff->add_flag("--unconditional", td_uncond);
    train_diff->add_option("--steps", td_cfg.steps);
    train_diff->add_option("--batch", td_cfg.batch_shapes);
    train_diff->add_option("--lr", td_cfg.lr);
    train_diff->add_option("--lr-final", td_cfg.lr_final);
    train_diff->add_option("--dropout-p", td_cfg.dropout_p);
    train_diff->add_option("--condition-hidden", td_cfg.condition_hidden);
    train_diff->add_option("--condition-points", td_cfg.condition_points);
    train_diff->add_option("--model-dim", td_cfg.denoiser.model_dim);
    train_diff->add_option("--time-dim", td_cfg.denoiser.time_dim);
    train_diff->add_option("--blocks", td_cfg.denoiser.blocks);
    train_diff->add_option("--ff-hidden", td_cfg.denoiser.ff_hidden);
    train_diff->add_option("--seed", td_cfg.seed);
    train_diff->add_option("--log-every", td_cfg.log_every);
    add_schedule_options(train_diff, td_cfg);
    train_diff->callback(
        [&] { rc = run_train_diff(td_latents, td_mod, td_data, td_out, td_uncond, td_cfg); });

    // finetune
    std::string ft_data, ft_mod, ft_diff, ft_out;
    TrainConfig ft_cfg;
    auto* finetune = app.add_subcommand("finetune", "End-to-end fine-tune of all modules");
    finetune->add_option("--data", ft_data)->required();
    finetune->add_option("--mod-ckpt", ft_mod)->required();
    finetune->add_option("--diff-ckpt", ft_diff)->required();
    finetune->add_option("--out", ft_out)->required();
    finetune->add_option("--steps", ft_cfg.steps);
    finetune->add_option("--batch", ft_cfg.batch_shapes);
    finetune->add_option("--queries", ft_cfg.queries_per_shape);
    finetune->add_option("--lr", ft_cfg.lr);
    finetune->add_option("--lr-final", ft_cfg.lr_final);
    finetune->add_option("--dropout-p", ft_cfg.dropout_p);
    finetune->add_flag("--freeze-modulation", ft_cfg.freeze_modulation);
    finetune->add_flag("--freeze-diffusion", ft_cfg.freeze_diffusion);
    finetune->add_option("--seed", ft_cfg.seed);
    finetune->add_option("--log-every", ft_cfg.log_every);
    finetune->callback([&] { rc = run_finetune(ft_data, ft_mod, ft_diff, ft_out, ft_cfg); });

    // sample
    std::string sm_mod, sm_diff, sm_out;
    int sm_n = 8, sm_res = 64, sm_cloud_points = 2048;
    double sm_omega = 0.0;
    uint64_t sm_seed = 7;
    auto* sample = app.add_subcommand("sample", "Unconditional generation");
    sample->add_option("--mod-ckpt", sm_mod)->required();
    sample->add_option("--diff-ckpt", sm_diff)->required();
    sample->add_option("--out", sm_out)->required();
    sample->add_option("--n", sm_n);
    sample->add_option("--resolution", sm_res);
    sample->add_option("--omega", sm_omega);
    sample->add_option("--cloud-points", sm_cloud_points);
    sample->add_option("--seed", sm_seed);
    sample->callback([&] {
        rc = run_sample(sm_mod, sm_diff, sm_out, sm_n, sm_res, sm_omega, sm_cloud_points,
                        sm_seed);
    });

    // complete
    std::string cp_mod, cp_diff, cp_cloud, cp_out;
    int cp_n = 10, cp_res = 64, cp_cond_points = 128, cp_cloud_points = 2048;
    double cp_omega = 0.0;
    bool cp_raw = false;
    uint64_t cp_seed = 7;
    auto* complete = app.add_subcommand("complete", "Partial-cloud conditioned completion");
    complete->add_option("--mod-ckpt", cp_mod)->required();
    complete->add_option("--diff-ckpt", cp_diff)->required();
    complete->add_option("--cloud", cp_cloud)->required();
    complete->add_option("--out", cp_out)->required();
    complete->add_option("--n", cp_n);
    complete->add_option("--resolution", cp_res);
    complete->add_option("--omega", cp_omega);
    complete->add_flag("--raw-partial", cp_raw,
                       "Use the cloud as the condition directly, skipping the subsample+crop");
    complete->add_option("--condition-points", cp_cond_points);
    complete->add_option("--cloud-points", cp_cloud_points);
    complete->add_option("--seed", cp_seed);
    complete->callback([&] {
        rc = run_complete(cp_mod, cp_diff, cp_cloud, cp_out, cp_n, cp_res, cp_omega, cp_raw,
                          cp_cond_points, cp_cloud_points, cp_seed);
    });

    // eval
    std::string ev_gen, ev_ref, ev_out;
    int ev_repeats = 1, ev_subsample = 0;
    uint64_t ev_seed = 7;
    auto* eval_cmd = app.add_subcommand("eval", "Set-level metrics between cloud directories");
    eval_cmd->add_option("--generated", ev_gen)->required();
    eval_cmd->add_option("--reference", ev_ref)->required();
    eval_cmd->add_option("--out", ev_out)->required();
    eval_cmd->add_option("--repeats", ev_repeats);
    eval_cmd->add_option("--subsample", ev_subsample,
                         "Subsample every cloud to this many points per repeat (0 = off)");
    eval_cmd->add_option("--seed", ev_seed);
    eval_cmd->callback(
        [&] { rc = run_eval(ev_gen, ev_ref, ev_out, ev_repeats, ev_subsample, ev_seed); });

    // mesh
    std::string mh_mod, mh_latents, mh_out;
    int mh_index = 0, mh_res = 64;
    auto* mesh_cmd = app.add_subcommand("mesh", "Mesh one stored latent");
    mesh_cmd->add_option("--mod-ckpt", mh_mod)->required();
    mesh_cmd->add_option("--latents", mh_latents)->required();
    mesh_cmd->add_option("--index", mh_index);
    mesh_cmd->add_option("--resolution", mh_res);
    mesh_cmd->add_option("--out", mh_out)->required();
    mesh_cmd->callback([&] { rc = run_mesh(mh_mod, mh_latents, mh_index, mh_res, mh_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return rc;
}
