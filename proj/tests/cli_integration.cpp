// End-to-end checks of the command-line tool; argv[1] is the binary path.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

static int failures = 0;

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (cond) {                                                      \
            std::printf("PASS %s\n", #cond);                             \
        } else {                                                         \
            std::printf("FAIL %s (%s:%d)\n", #cond, __FILE__, __LINE__); \
            ++failures;                                                  \
        }                                                                \
    } while (0)

static std::string cli;

static int run(const std::string& args) {
    std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

static nlohmann::json load_json(const fs::path& p) {
    std::ifstream f(p);
    return nlohmann::json::parse(f);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_integration <dsdf-cli path>\n");
        return 2;
    }
    cli = argv[1];

    fs::path ws = fs::temp_directory_path() / "dsdf_cli_integration";
    fs::remove_all(ws);
    fs::create_directories(ws);
    const std::string w = ws.string() + "/";

    // usage errors exit 1, runtime failures exit 2
    CHECK(run("") == 1);
    CHECK(run("no-such-command") == 1);
    CHECK(run("train-mod --data " + w + "missing --out " + w + "x.dsdf --steps 1") == 2);

    // dataset generation is seed deterministic, bitwise
    CHECK(run("gen-data --out " + w + "data --train 6 --test 2 --points 200 --seed 5") == 0);
    CHECK(run("gen-data --out " + w + "data2 --train 6 --test 2 --points 200 --seed 5") == 0);
    CHECK(slurp(ws / "data/manifest.json") == slurp(ws / "data2/manifest.json"));
    CHECK(slurp(ws / "data/clouds/train-0.xyz") == slurp(ws / "data2/clouds/train-0.xyz"));
    CHECK(slurp(ws / "data/clouds/test-1.xyz") == slurp(ws / "data2/clouds/test-1.xyz"));
    CHECK(run("gen-data --out " + w + "data3 --train 6 --test 2 --points 200 --seed 6") == 0);
    CHECK(slurp(ws / "data/clouds/train-0.xyz") != slurp(ws / "data3/clouds/train-0.xyz"));

    // modulation training writes checkpoint, loss log and config sidecar
    std::string dims = " --feature-dim 12 --latent-dim 6 --point-hidden 12 --vae-hidden 12"
                       " --sdf-hidden 12 --sdf-layers 2";
    CHECK(run("train-mod --data " + w + "data --out " + w + "mod.dsdf --steps 300 --batch 2"
              " --queries 32 --lr 1e-3 --seed 5" + dims) == 0);
    CHECK(fs::exists(ws / "mod.dsdf"));
    CHECK(fs::exists(ws / "mod.dsdf.loss.csv"));
    auto mod_cfg = load_json(ws / "mod.dsdf.config.json");
    CHECK(mod_cfg["latent_dim"] == 6);
    CHECK(mod_cfg["command"] == "train-mod");

    // latent extraction is deterministic
    CHECK(run("extract-latents --data " + w + "data --ckpt " + w + "mod.dsdf --out " + w +
              "latents.dsdf") == 0);
    CHECK(run("extract-latents --data " + w + "data --ckpt " + w + "mod.dsdf --out " + w +
              "latents2.dsdf") == 0);
    CHECK(slurp(ws / "latents.dsdf") == slurp(ws / "latents2.dsdf"));

    // conditional diffusion training
    CHECK(run("train-diff --latents " + w + "latents.dsdf --mod-ckpt " + w + "mod.dsdf --data " +
              w + "data --out " + w + "diff.dsdf --steps 30 --batch 2 --model-dim 16"
              " --time-dim 8 --blocks 2 --ff-hidden 24 --condition-hidden 8 --T 10 --seed 5") ==
          0);
    CHECK(fs::exists(ws / "diff.dsdf"));

    // fine-tune produces a joint checkpoint usable for both model roles
    CHECK(run("finetune --data " + w + "data --mod-ckpt " + w + "mod.dsdf --diff-ckpt " + w +
              "diff.dsdf --out " + w + "joint.dsdf --steps 4 --batch 2 --queries 16 --seed 5") ==
          0);

    // sampling is seed deterministic, bitwise on the stored latents
    std::string sample_args = "sample --mod-ckpt " + w + "joint.dsdf --diff-ckpt " + w +
                              "joint.dsdf --n 3 --resolution 16 --cloud-points 64 --seed 9";
    CHECK(run(sample_args + " --out " + w + "samples") == 0);
    CHECK(run(sample_args + " --out " + w + "samples2") == 0);
    CHECK(slurp(ws / "samples/latents.dsdf") == slurp(ws / "samples2/latents.dsdf"));
    auto summary = load_json(ws / "samples/summary.json");
    CHECK(summary["items"].size() == 3);

    // the mesh subcommand reproduces a sampled mesh byte for byte
    int non_empty = -1;
    for (size_t i = 0; i < summary["items"].size(); ++i)
        if (!summary["items"][i]["mesh_empty"].get<bool>()) {
            non_empty = static_cast<int>(i);
            break;
        }
    if (non_empty >= 0) {
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%03d.obj", non_empty);
        CHECK(run("mesh --mod-ckpt " + w + "joint.dsdf --latents " + w +
                  "samples/latents.dsdf --index " + std::to_string(non_empty) +
                  " --resolution 16 --out " + w + "remesh.obj") == 0);
        CHECK(slurp(ws / "remesh.obj") == slurp(ws / "samples" / name));
    } else {
        std::printf("SKIP mesh equality: all samples empty\n");
    }

    // completion runs the subsample+crop protocol and reports cons per item
    CHECK(run("complete --mod-ckpt " + w + "joint.dsdf --diff-ckpt " + w + "joint.dsdf"
              " --cloud " + w + "data/clouds/train-0.xyz --out " + w + "comps --n 2"
              " --resolution 16 --cloud-points 64 --seed 9") == 0);
    auto comp_summary = load_json(ws / "comps/summary.json");
    CHECK(comp_summary["partial_points"] == 64);
    CHECK(comp_summary["items"].size() == 2);
    CHECK(comp_summary["items"][0].contains("cons"));
    CHECK(fs::exists(ws / "comps/partial.xyz"));

    // raw partial skips the crop
    CHECK(run("complete --mod-ckpt " + w + "joint.dsdf --diff-ckpt " + w + "joint.dsdf"
              " --cloud " + w + "data/clouds/train-0.xyz --out " + w + "comps_raw --n 1"
              " --resolution 16 --raw-partial --seed 9") == 0);
    auto raw_summary = load_json(ws / "comps_raw/summary.json");
    CHECK(raw_summary["partial_points"] == 200);

    // eval emits a structured report
    CHECK(run("eval --generated " + w + "data/clouds --reference " + w + "data/clouds --out " +
              w + "report.json --repeats 2 --subsample 50 --seed 5") == 0);
    auto report = load_json(ws / "report.json");
    CHECK(report["metrics"].contains("mmd"));
    CHECK(report["metrics"].contains("cov"));
    CHECK(report["metrics"].contains("1-nna"));
    CHECK(report["distance_measure"] == "squared-chamfer");
    CHECK(report["runs"].size() == 2);
    // identical sets: every reference is matched exactly
    CHECK(report["metrics"]["cov"] == 1.0);

    // eval rerun with the same seed is identical
    CHECK(run("eval --generated " + w + "data/clouds --reference " + w + "data/clouds --out " +
              w + "report2.json --repeats 2 --subsample 50 --seed 5") == 0);
    auto report2 = load_json(ws / "report2.json");
    CHECK(report["metrics"] == report2["metrics"]);

    fs::remove_all(ws);
    std::printf("%s: %d failure(s)\n", failures == 0 ? "OK" : "FAILED", failures);
    return failures == 0 ? 0 : 1;
}
