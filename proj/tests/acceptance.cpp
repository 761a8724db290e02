// Acceptance suite: one line per criterion, exit code = number of failures.
// All tolerances are pinned here; the trained fixture is shared across
// criteria and sized for a single core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dsdf/pipeline.hpp"

using namespace dsdf;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d %-28s %s  (%s)\n", idx, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- criterion 1: analytic gradients vs central differences ----------------

double gradient_suite_worst() {
    double worst = 0;
    Rng rng(11);
    {
        // composite net touching every differentiable op family
        ParamStore ps;
        LinearLayer l1 = LinearLayer::create(ps, "l1", 4, 8, rng);
        LinearLayer l2 = LinearLayer::create(ps, "l2", 8, 4, rng);
        LayerNormParams ln = LayerNormParams::create(ps, "ln", 8);
        Tensor x0 = Tensor::randn({3, 4}, rng);
        for (size_t i = 0; i < ps.size(); ++i) {
            Tensor copy(ps.at(i).shape(), ps.at(i).data());
            double err = finite_diff_check(
                [&](const Tensor& p) {
                    std::vector<double> saved = ps.at(i).data();
                    ps.at(i).mutable_data() = p.data();
                    Tensor h = gelu(linear_forward(l1, x0));
                    h = ln(h);
                    h = dsdf::tanh(linear_forward(l2, h));
                    h = softmax(h, 1);
                    double v = add(mean(mul(h, h)), sum(abs(h))).item();
                    ps.at(i).mutable_data() = saved;
                    return v;
                },
                [&](const Tensor& p) {
                    std::vector<double> saved = ps.at(i).data();
                    ps.at(i).mutable_data() = p.data();
                    GradientTape tape;
                    ps.watch_all(tape);
                    Tensor loss;
                    {
                        TapeScope scope(tape);
                        Tensor h = gelu(linear_forward(l1, x0));
                        h = ln(h);
                        h = dsdf::tanh(linear_forward(l2, h));
                        h = softmax(h, 1);
                        loss = add(mean(mul(h, h)), sum(abs(h)));
                    }
                    tape.backward(loss);
                    Tensor g = tape.grad_tensor(ps.at(i));
                    ps.at(i).mutable_data() = saved;
                    return g;
                },
                copy);
            worst = std::max(worst, err);
        }
    }
    {
        // full modulation loss on a tiny model
        ModulationConfig mc;
        mc.feature_dim = 8;
        mc.latent_dim = 4;
        mc.point_hidden = 8;
        mc.vae_hidden = 8;
        mc.sdf_hidden = 8;
        mc.sdf_layers = 2;
        ModulationModel model(mc, rng);
        PointCloud cloud;
        for (int i = 0; i < 6; ++i)
            cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Tensor queries = Tensor::randn({4, 3}, rng, 0.3);
        Tensor gt = Tensor::randn({4}, rng, 0.2);
        for (const char* name : {"enc.l2.w", "vae.enc.l5.w", "sdf.in.w"}) {
            size_t idx = 0;
            for (size_t i = 0; i < model.params.size(); ++i)
                if (model.params.names()[i] == name) idx = i;
            Tensor copy(model.params.at(idx).shape(), model.params.at(idx).data());
            double err = finite_diff_check(
                [&](const Tensor& p) {
                    std::vector<double> saved = model.params.at(idx).data();
                    model.params.at(idx).mutable_data() = p.data();
                    double v =
                        modulation_loss(model, cloud, queries, gt, 1e-5, nullptr).total.item();
                    model.params.at(idx).mutable_data() = saved;
                    return v;
                },
                [&](const Tensor& p) {
                    std::vector<double> saved = model.params.at(idx).data();
                    model.params.at(idx).mutable_data() = p.data();
                    GradientTape tape;
                    model.params.watch_all(tape);
                    Tensor loss;
                    {
                        TapeScope scope(tape);
                        loss = modulation_loss(model, cloud, queries, gt, 1e-5, nullptr).total;
                    }
                    tape.backward(loss);
                    Tensor g = tape.grad_tensor(model.params.at(idx));
                    model.params.at(idx).mutable_data() = saved;
                    return g;
                },
                copy);
            worst = std::max(worst, err);
        }
    }
    {
        // diffusion loss through the denoiser
        DenoiserConfig dc;
        dc.latent_dim = 4;
        dc.model_dim = 16;
        dc.time_dim = 8;
        dc.condition_dim = 8;
        dc.blocks = 2;
        dc.ff_hidden = 24;
        DenoiserModel model(dc, rng);
        DiffusionSchedule s = make_schedule(20, 1e-3, 0.2);
        Tensor z0 = Tensor::randn({4}, rng);
        Tensor eps = Tensor::randn({4}, rng);
        Tensor cond = Tensor::randn({8}, rng);
        for (const char* name : {"den.in.w", "den.b0.ca.k.w", "den.b1.ff1.w"}) {
            size_t idx = 0;
            for (size_t i = 0; i < model.params.size(); ++i)
                if (model.params.names()[i] == name) idx = i;
            Tensor copy(model.params.at(idx).shape(), model.params.at(idx).data());
            double err = finite_diff_check(
                [&](const Tensor& p) {
                    std::vector<double> saved = model.params.at(idx).data();
                    model.params.at(idx).mutable_data() = p.data();
                    double v = diffusion_loss(model, z0, 7, eps, s, cond).item();
                    model.params.at(idx).mutable_data() = saved;
                    return v;
                },
                [&](const Tensor& p) {
                    std::vector<double> saved = model.params.at(idx).data();
                    model.params.at(idx).mutable_data() = p.data();
                    GradientTape tape;
                    model.params.watch_all(tape);
                    Tensor loss;
                    {
                        TapeScope scope(tape);
                        loss = diffusion_loss(model, z0, 7, eps, s, cond);
                    }
                    tape.backward(loss);
                    Tensor g = tape.grad_tensor(model.params.at(idx));
                    model.params.at(idx).mutable_data() = saved;
                    return g;
                },
                copy);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// --- criterion 9 helper: brute-force metric oracles ------------------------

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
    auto one_way = [](const PointCloud& x, const PointCloud& y) {
        double total = 0;
        for (const auto& p : x.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : y.points) {
                double d2 = 0;
                for (int k = 0; k < 3; ++k) d2 += (p[k] - q[k]) * (p[k] - q[k]);
                best = std::min(best, d2);
            }
            total += best;
        }
        return total / x.points.size();
    };
    return one_way(a, b) + one_way(b, a);
}

PointCloud mesh_cloud(const Mesh& m, int n, uint64_t seed) {
    Rng rng(seed);
    return mesh_sample_points(m, n, rng);
}

struct CompletionSet {
    PointCloud partial;
    std::vector<PointCloud> clouds;  // non-empty completions only
    std::vector<double> cons_values;
};

std::vector<CompletionSet> run_completions(const ModulationModel& mod, const DenoiserModel& den,
                                           const ConditionEncoder& enc,
                                           const DiffusionSchedule& schedule,
                                           const std::vector<ShapeEntry>& shapes, int n_partials,
                                           int per_partial, int resolution, uint64_t seed) {
    std::vector<CompletionSet> out;
    for (int i = 0; i < n_partials; ++i) {
        Rng prng = Rng::with_stream(seed, 0x90000000ull + i);
        CompletionSet set;
        set.partial = make_partial(shapes[i].cloud, 128, prng);
        auto gens = generate(mod, den, &enc, schedule, &set.partial, per_partial, resolution, 0.0,
                             seed * 1000003ull + i);
        for (const auto& g : gens) {
            if (g.mesh_empty) continue;
            set.clouds.push_back(mesh_cloud(g.mesh, 1024, seed + 31 * i + set.clouds.size()));
            set.cons_values.push_back(g.cons);
        }
        out.push_back(std::move(set));
    }
    return out;
}

struct UhdTmd {
    double mean_uhd = 0, mean_tmd = 0, filtered_uhd = 0;
    int usable = 0;
};

UhdTmd score_completions(const std::vector<CompletionSet>& sets) {
    UhdTmd r;
    for (const auto& s : sets) {
        if (s.clouds.size() < 2) continue;
        r.mean_uhd += uhd(s.partial, s.clouds);
        r.mean_tmd += tmd(s.clouds);
        // keep the half with the lowest cons
        std::vector<double> sorted = s.cons_values;
        std::sort(sorted.begin(), sorted.end());
        double thresh = sorted[(sorted.size() - 1) / 2];
        std::vector<PointCloud> kept;
        for (size_t i = 0; i < s.clouds.size(); ++i)
            if (s.cons_values[i] <= thresh) kept.push_back(s.clouds[i]);
        r.filtered_uhd += uhd(s.partial, kept);
        ++r.usable;
    }
    if (r.usable) {
        r.mean_uhd /= r.usable;
        r.mean_tmd /= r.usable;
        r.filtered_uhd /= r.usable;
    }
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    auto wall0 = std::chrono::steady_clock::now();
    const char* cli = argc > 1 ? argv[1] : nullptr;

    // ---- criterion 1: gradients -------------------------------------------
    {
        double worst = gradient_suite_worst();
        report(1, "gradient-finite-diff", worst < 1e-3, fmt("worst rel err %.2e", worst));
    }

    // ---- criterion 2: forward-process marginals ---------------------------
    {
        DiffusionSchedule s = make_schedule();
        std::vector<double> z0{0.8, -0.3, 0.1, 1.2};
        Rng rng(21);
        const int n = 20000;
        bool ok = s.alpha_bar[s.T] < 0.01;
        std::string detail = fmt("abar_T %.4f", s.alpha_bar[s.T]);
        for (int t : {1, 100, 250, 500}) {
            std::vector<double> mean(4, 0.0), m2(4, 0.0);
            for (int i = 0; i < n; ++i) {
                std::vector<double> eps(4);
                for (auto& v : eps) v = rng.normal();
                auto zt = q_sample(z0, t, eps, s);
                for (int j = 0; j < 4; ++j) {
                    mean[j] += zt[j];
                    m2[j] += zt[j] * zt[j];
                }
            }
            double want_var = 1.0 - s.alpha_bar[t];
            double se_mean = std::sqrt(want_var / n);
            double se_var = want_var * std::sqrt(2.0 / (n - 1));
            for (int j = 0; j < 4; ++j) {
                double m = mean[j] / n;
                double v = m2[j] / n - m * m;
                if (std::fabs(m - std::sqrt(s.alpha_bar[t]) * z0[j]) >= 3 * se_mean) ok = false;
                if (std::fabs(v - want_var) >= 3 * se_var) ok = false;
            }
        }
        report(2, "q_sample-marginals", ok, detail);
    }

    // ---- criterion 4: marching cubes sphere (cheap, do before training) ---
    {
        ShapeSpec sphere;
        sphere.kind = ShapeSpec::Kind::sphere;
        sphere.radius = 0.5;
        GridField field = sample_grid([&](const Vec3& p) { return sdf_eval(sphere, p); }, 64);
        Mesh m = marching_cubes(field);
        std::map<std::pair<int, int>, int> edge_count;
        for (const auto& tri : m.triangles)
            for (int e = 0; e < 3; ++e) {
                int a = tri[e], b = tri[(e + 1) % 3];
                edge_count[{std::min(a, b), std::max(a, b)}]++;
            }
        bool watertight = !m.triangles.empty();
        for (const auto& [k, c] : edge_count)
            if (c != 2) watertight = false;
        long V = static_cast<long>(m.vertices.size());
        long E = static_cast<long>(edge_count.size());
        long F = static_cast<long>(m.triangles.size());
        long euler = V - E + F;
        double cell_diag = std::sqrt(3.0) * 2.0 / (64 - 1);
        double worst_dev = 0;
        for (const auto& v : m.vertices)
            worst_dev = std::max(worst_dev, std::fabs(sdf_eval(sphere, v)));
        report(4, "marching-cubes-sphere",
               watertight && euler == 2 && worst_dev < cell_diag,
               fmt("V %ld E %ld F %ld euler %ld watertight %d vtx dev %.4f/%.4f", V, E, F,
                   euler, watertight ? 1 : 0, worst_dev, cell_diag));
    }

    // ---- criterion 9: metric oracles --------------------------------------
    {
        Rng rng(91);
        bool ok = true;
        double worst = 0;
        for (int trial = 0; trial < 6; ++trial) {
            std::vector<PointCloud> gen, ref;
            int n_clouds = 2 + static_cast<int>(rng.index(7));
            for (int i = 0; i < n_clouds; ++i) {
                PointCloud g, r;
                int np = 4 + static_cast<int>(rng.index(29));
                int nq = 4 + static_cast<int>(rng.index(29));
                for (int k = 0; k < np; ++k)
                    g.points.push_back(
                        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
                for (int k = 0; k < nq; ++k)
                    r.points.push_back(
                        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
                gen.push_back(g);
                ref.push_back(r);
            }
            double ref_mmd = 0;
            for (const auto& r : ref) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& g : gen) best = std::min(best, brute_chamfer(g, r));
                ref_mmd += best;
            }
            ref_mmd /= ref.size();
            worst = std::max(worst, std::fabs(mmd(gen, ref) - ref_mmd));
            for (size_t i = 0; i < gen.size(); ++i)
                worst = std::max(worst, std::fabs(chamfer_distance(gen[i], ref[i]) -
                                                  brute_chamfer(gen[i], ref[i])));
            if (worst > 1e-12) ok = false;
        }
        report(9, "metric-brute-force-oracle", ok, fmt("worst abs diff %.2e", worst));
    }

    // ---- shared trained fixture -------------------------------------------
    std::printf("-- training shared fixture (single core, this takes a while)\n");
    std::fflush(stdout);
    auto t0 = std::chrono::steady_clock::now();

    Dataset ds = generate_dataset(200, 32, 512, 777);

    ModulationConfig mc;
    mc.feature_dim = 64;
    mc.latent_dim = 32;
    mc.point_hidden = 64;
    mc.vae_hidden = 64;
    mc.sdf_hidden = 64;
    mc.sdf_layers = 4;
    Rng mod_rng(101);
    ModulationModel mod(mc, mod_rng);

    TrainConfig mcfg;
    mcfg.seed = 101;
    mcfg.steps = 6000;
    mcfg.batch_shapes = 8;
    mcfg.queries_per_shape = 256;
    mcfg.lr = 1e-3;
    mcfg.lr_final = 1e-4;
    mcfg.modulation = mc;
    mcfg.sync_dims();
    {
        Optimizer opt(mcfg.lr);
        TrainResult res = train_modulation(mod, ds.train, mcfg, opt);
        std::printf("-- modulation: %d steps, final loss %.4f, %.0fs\n", res.steps_run,
                    res.final_loss, secs_since(t0));
        std::fflush(stdout);
    }

    // ---- criterion 3: held-out modulation fidelity ------------------------
    {
        double total = 0;
        int empty = 0;
        for (size_t i = 0; i < ds.test.size(); ++i) {
            const auto& e = ds.test[i];
            Tensor pi = mod.encode(e.cloud);
            auto post = mod.vae_encode(pi, nullptr);
            Mesh m = reconstruct_mesh(mod, post.z.data(), 44);
            if (m.empty()) {
                ++empty;
                total += 1.0;
                continue;
            }
            PointCloud rec = mesh_cloud(m, 2048, 1000 + i);
            Rng gr(2000 + static_cast<uint64_t>(i));
            PointCloud gt = sample_surface(e.spec, 2048, gr);
            total += chamfer_distance(rec, gt);
        }
        double mean_cd = total / ds.test.size();
        report(3, "held-out-reconstruction", mean_cd < 5e-3,
               fmt("mean squared-CD %.5f over %zu shapes, %d empty", mean_cd, ds.test.size(),
                   empty));
    }

    // ---- diffusion training ------------------------------------------------
    auto latents = extract_latents(mod, ds.train);

    DenoiserConfig dc;
    dc.latent_dim = mc.latent_dim;
    dc.model_dim = 64;
    dc.time_dim = 16;
    dc.condition_dim = mc.feature_dim;
    dc.blocks = 4;
    dc.ff_hidden = 128;
    DiffusionSchedule schedule = make_schedule();

    Rng den_rng(102);
    DenoiserModel den_uncond(dc, den_rng);
    {
        TrainConfig cfg;
        cfg.seed = 102;
        cfg.steps = 5000;
        cfg.batch_shapes = 8;
        cfg.lr = 1e-3;
        cfg.lr_final = 1e-4;
        Optimizer opt(cfg.lr);
        auto t1 = std::chrono::steady_clock::now();
        TrainResult res = train_diffusion(den_uncond, nullptr, latents, nullptr, schedule, cfg,
                                          opt);
        std::printf("-- uncond diffusion: final loss %.4f, %.0fs\n", res.final_loss,
                    secs_since(t1));
        std::fflush(stdout);
    }

    // ---- criterion 5: unconditional generation quality --------------------
    {
        auto t1 = std::chrono::steady_clock::now();
        int want = 64;
        std::vector<PointCloud> gen_clouds;
        int tried = 0, non_empty_first50 = 0;
        while (static_cast<int>(gen_clouds.size()) < want && tried < 90) {
            Rng rng = Rng::with_stream(505, 0x40000000ull + tried);
            SampleOptions o;
            auto z = sample_latent(den_uncond, schedule, zero_mask(dc.condition_dim), rng, o);
            Mesh m = reconstruct_mesh(mod, z, 40);
            if (!m.empty()) {
                gen_clouds.push_back(mesh_cloud(m, 2048, 3000 + tried));
                if (tried < 50) ++non_empty_first50;
            }
            ++tried;
        }
        // reference shapes are held out: a fresh draw from the same generator
        Dataset held = generate_dataset(want, 0, 2048, 888);
        std::vector<PointCloud> ref_clouds;
        for (int i = 0; i < want; ++i) ref_clouds.push_back(held.train[i].cloud);
        bool enough = non_empty_first50 >= 45 && static_cast<int>(gen_clouds.size()) >= want;
        double nna = 1.0;
        if (enough) {
            gen_clouds.resize(want);
            nna = one_nna(gen_clouds, ref_clouds);
        }
        report(5, "unconditional-generation", enough && nna < 0.9,
               fmt("non-empty %d/50, 1-NNA %.3f, %.0fs", non_empty_first50, nna,
                   secs_since(t1)));
    }

    // ---- conditional diffusion --------------------------------------------
    Rng cd_rng(103);
    DenoiserModel den_cond(dc, cd_rng);
    ConditionEncoder cond_enc(64, dc.condition_dim, cd_rng);
    {
        TrainConfig cfg;
        cfg.seed = 103;
        cfg.steps = 5000;
        cfg.batch_shapes = 8;
        cfg.lr = 1e-3;
        cfg.lr_final = 1e-4;
        cfg.dropout_p = 0.8;
        cfg.condition_points = 128;
        Optimizer opt(cfg.lr);
        auto t1 = std::chrono::steady_clock::now();
        TrainResult res = train_diffusion(den_cond, &cond_enc, latents, &ds.train, schedule, cfg,
                                          opt);
        std::printf("-- cond diffusion: final loss %.4f, %.0fs\n", res.final_loss,
                    secs_since(t1));
        std::fflush(stdout);
    }

    // ---- criterion 8: guidance degeneracy (uses the trained cond model) ---
    {
        Rng prng(81);
        PointCloud partial = make_partial(ds.test[0].cloud, 128, prng);
        Tensor condition = cond_enc.encode(partial);
        Rng ra(82), rb(82);
        SampleOptions plain;
        SampleOptions forced;
        forced.force_guidance_path = true;
        auto za = sample_latent(den_cond, schedule, condition, ra, plain);
        auto zb = sample_latent(den_cond, schedule, condition, rb, forced);
        report(8, "guidance-omega0-bitwise", za == zb,
               za == zb ? "latents identical" : "latents differ");
    }

    // ---- criterion 6: completion quality ----------------------------------
    std::vector<CompletionSet> before;
    UhdTmd sb;
    {
        auto t1 = std::chrono::steady_clock::now();
        before = run_completions(mod, den_cond, cond_enc, schedule, ds.test, 16, 10, 32, 606);
        sb = score_completions(before);
        bool ok = sb.usable == 16 && sb.mean_uhd < 0.2 && sb.mean_tmd > 0 &&
                  sb.filtered_uhd <= sb.mean_uhd;
        report(6, "completion-quality", ok,
               fmt("UHD %.4f TMD %.5f filteredUHD %.4f usable %d/16, %.0fs", sb.mean_uhd,
                   sb.mean_tmd, sb.filtered_uhd, sb.usable, secs_since(t1)));
    }

    // ---- criterion 7: fine-tune keeps diversity ---------------------------
    {
        auto t1 = std::chrono::steady_clock::now();
        TrainConfig cfg;
        cfg.seed = 104;
        cfg.steps = 300;
        cfg.batch_shapes = 4;
        cfg.queries_per_shape = 128;
        cfg.lr = 1e-4;
        cfg.dropout_p = 0.8;
        cfg.condition_points = 128;
        Optimizer opt(cfg.lr);
        TrainResult res = finetune_end_to_end(mod, den_cond, cond_enc, ds.train, schedule, cfg,
                                              opt);
        auto after = run_completions(mod, den_cond, cond_enc, schedule, ds.test, 16, 10, 32, 606);
        UhdTmd sa = score_completions(after);
        report(7, "finetune-preserves-tmd", sa.usable == 16 && sa.mean_tmd >= sb.mean_tmd,
               fmt("TMD before %.5f after %.5f (loss %.4f), %.0fs", sb.mean_tmd, sa.mean_tmd,
                   res.final_loss, secs_since(t1)));
    }

    // ---- criterion 10: seed determinism -----------------------------------
    {
        bool ok = true;
        std::string detail;
        if (cli) {
            fs::path ws = fs::temp_directory_path() / "dsdf_acceptance_cli";
            fs::remove_all(ws);
            fs::create_directories(ws);
            std::string w = ws.string() + "/";
            auto shell = [&](const std::string& args) {
                std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
                int rc = std::system(cmd.c_str());
                return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
            };
            auto slurp = [](const fs::path& p) {
                std::ifstream f(p, std::ios::binary);
                std::ostringstream ss;
                ss << f.rdbuf();
                return ss.str();
            };
            std::string dims = " --feature-dim 12 --latent-dim 6 --point-hidden 12"
                               " --vae-hidden 12 --sdf-hidden 12 --sdf-layers 2";
            ok = shell("gen-data --out " + w + "d1 --train 4 --test 1 --points 100 --seed 3") ==
                     0 &&
                 shell("gen-data --out " + w + "d2 --train 4 --test 1 --points 100 --seed 3") ==
                     0 &&
                 slurp(ws / "d1/clouds/train-0.xyz") == slurp(ws / "d2/clouds/train-0.xyz") &&
                 shell("train-mod --data " + w + "d1 --out " + w + "m1.dsdf --steps 20 --batch 2"
                       " --queries 16 --seed 3" + dims) == 0 &&
                 shell("train-mod --data " + w + "d1 --out " + w + "m2.dsdf --steps 20 --batch 2"
                       " --queries 16 --seed 3" + dims) == 0 &&
                 slurp(ws / "m1.dsdf") == slurp(ws / "m2.dsdf");
            detail = ok ? "CLI reruns bitwise identical" : "CLI outputs differ";
            fs::remove_all(ws);
        } else {
            auto g1 = generate(mod, den_uncond, nullptr, schedule, nullptr, 2, 16, 0.0, 99);
            auto g2 = generate(mod, den_uncond, nullptr, schedule, nullptr, 2, 16, 0.0, 99);
            ok = g1.size() == g2.size();
            for (size_t i = 0; ok && i < g1.size(); ++i) ok = g1[i].latent == g2[i].latent;
            detail = ok ? "library reruns bitwise identical" : "library outputs differ";
        }
        report(10, "seed-determinism", ok, detail);
    }

    std::printf("acceptance: %d criterion failure(s), wall %.0fs\n", failures,
                secs_since(wall0));
    return failures;
}
