#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsdf/geometry.hpp"
#include "dsdf/rng.hpp"

namespace dsdf {

struct ShapeEntry {
    std::string id;
    std::string category;  // sphere-like, box-like, torus-like, mixed
    ShapeSpec spec;
    PointCloud cloud;  // full surface cloud (encoder input / crop source)
};

struct Dataset {
    std::vector<ShapeEntry> train, test;
};

namespace detail {

inline Vec3 centered_offset(Rng& rng, double extent) {
    // mimic normalized shape datasets: near-centered with a small jitter,
    // clamped so the whole shape stays inside [-1,1]^3
    double room = std::min(0.1, std::max(0.0, 0.95 - extent));
    return {rng.uniform(-room, room), rng.uniform(-room, room), rng.uniform(-room, room)};
}

inline ShapeSpec random_primitive(Rng& rng, int kind, double scale = 1.0) {
    ShapeSpec s;
    switch (kind) {
        case 0: {
            s.kind = ShapeSpec::Kind::sphere;
            s.radius = rng.uniform(0.3, 0.6) * scale;
            s.center = centered_offset(rng, s.radius);
            break;
        }
        case 1: {
            s.kind = ShapeSpec::Kind::box;
            s.half_extents = {rng.uniform(0.25, 0.5) * scale, rng.uniform(0.25, 0.5) * scale,
                              rng.uniform(0.25, 0.5) * scale};
            double m = std::max({s.half_extents[0], s.half_extents[1], s.half_extents[2]});
            s.center = centered_offset(rng, m);
            break;
        }
        default: {
            s.kind = ShapeSpec::Kind::torus;
            s.torus_major = rng.uniform(0.3, 0.5) * scale;
            s.torus_minor = rng.uniform(0.1, 0.2) * scale;
            s.center = centered_offset(rng, s.torus_major + s.torus_minor);
            break;
        }
    }
    return s;
}

}  // namespace detail

// Procedural analytic shape per category index (0 sphere-like, 1 box-like,
// 2 torus-like, 3 mixed two-primitive union).
inline ShapeSpec random_shape(int category, Rng& rng) {
    if (category < 3) return detail::random_primitive(rng, category);
    ShapeSpec s;
    s.kind = ShapeSpec::Kind::csg_union;
    s.children.push_back(detail::random_primitive(rng, static_cast<int>(rng.index(3)), 0.7));
    s.children.push_back(detail::random_primitive(rng, static_cast<int>(rng.index(3)), 0.7));
    return s;
}

inline const char* category_name(int category) {
    switch (category) {
        case 0: return "sphere-like";
        case 1: return "box-like";
        case 2: return "torus-like";
        default: return "mixed";
    }
}

inline Dataset generate_dataset(int n_train, int n_test, int cloud_points, uint64_t seed) {
    Dataset ds;
    auto make = [&](int n, const char* split, std::vector<ShapeEntry>& out, uint64_t stream) {
        for (int i = 0; i < n; ++i) {
            Rng rng = Rng::with_stream(seed, stream * 1000003ull + i);
            int category = i % 4;
            ShapeEntry e;
            e.id = std::string(split) + "-" + std::to_string(i);
            e.category = category_name(category);
            e.spec = random_shape(category, rng);
            e.cloud = sample_surface(e.spec, cloud_points, rng);
            out.push_back(std::move(e));
        }
    };
    make(n_train, "train", ds.train, 1);
    make(n_test, "test", ds.test, 2);
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "specs");
    fs::create_directories(fs::path(dir) / "clouds");
    nlohmann::json manifest;
    auto dump = [&](const std::vector<ShapeEntry>& entries, const char* split) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : entries) {
            std::string spec_path = "specs/" + e.id + ".json";
            std::string cloud_path = "clouds/" + e.id + ".xyz";
            std::ofstream sf(fs::path(dir) / spec_path);
            sf << e.spec.to_json().dump(2) << "\n";
            save_xyz(e.cloud, (fs::path(dir) / cloud_path).string());
            arr.push_back({{"id", e.id},
                           {"category", e.category},
                           {"spec", spec_path},
                           {"cloud", cloud_path}});
        }
        manifest[split] = arr;
    };
    dump(ds.train, "train");
    dump(ds.test, "test");
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("load_dataset: no manifest in " + dir);
    nlohmann::json manifest;
    mf >> manifest;
    Dataset ds;
    auto read = [&](const char* split, std::vector<ShapeEntry>& out) {
        for (const auto& j : manifest.at(split)) {
            ShapeEntry e;
            e.id = j.at("id");
            e.category = j.at("category");
            std::ifstream sf(fs::path(dir) / std::string(j.at("spec")));
            nlohmann::json sj;
            sf >> sj;
            e.spec = ShapeSpec::from_json(sj);
            e.cloud = load_xyz((fs::path(dir) / std::string(j.at("cloud"))).string());
            out.push_back(std::move(e));
        }
    };
    read("train", ds.train);
    read("test", ds.test);
    return ds;
}

}  // namespace dsdf
