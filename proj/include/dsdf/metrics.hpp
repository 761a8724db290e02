#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dsdf/geometry.hpp"

namespace dsdf {

struct EvalReport {
    std::vector<std::pair<std::string, double>> metrics;
    int n_generated = 0, n_reference = 0;
    std::string distance_measure = "squared-chamfer";
    uint64_t seed = 0;
    double wall_clock_s = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& [k, v] : metrics) j["metrics"][k] = v;
        j["n_generated"] = n_generated;
        j["n_reference"] = n_reference;
        j["distance_measure"] = distance_measure;
        j["seed"] = seed;
        j["wall_clock_s"] = wall_clock_s;
        return j;
    }
};

// CD matrix between two cloud lists, d[i][j] = CD(a[i], b[j]).
inline std::vector<std::vector<double>> chamfer_matrix(const std::vector<PointCloud>& a,
                                                       const std::vector<PointCloud>& b) {
    std::vector<std::vector<double>> d(a.size(), std::vector<double>(b.size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) d[i][j] = chamfer_distance(a[i], b[j]);
    return d;
}

// Minimum matching distance: mean over reference clouds of the minimum CD
// to any generated cloud.
inline double mmd(const std::vector<PointCloud>& generated,
                  const std::vector<PointCloud>& reference) {
    if (generated.empty() || reference.empty()) throw std::invalid_argument("mmd: empty set");
    double total = 0;
    for (const auto& r : reference) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& g : generated) best = std::min(best, chamfer_distance(g, r));
        total += best;
    }
    return total / reference.size();
}

// Coverage: fraction of reference clouds that are the nearest reference to
// at least one generated cloud.
inline double cov(const std::vector<PointCloud>& generated,
                  const std::vector<PointCloud>& reference) {
    if (generated.empty() || reference.empty()) throw std::invalid_argument("cov: empty set");
    std::vector<bool> covered(reference.size(), false);
    for (const auto& g : generated) {
        double best = std::numeric_limits<double>::infinity();
        size_t arg = 0;
        for (size_t j = 0; j < reference.size(); ++j) {
            double d = chamfer_distance(g, reference[j]);
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        covered[arg] = true;
    }
    double n = 0;
    for (bool c : covered) n += c ? 1 : 0;
    return n / reference.size();
}

// Leave-one-out 1-NN classification accuracy over the union under CD;
// distance ties break toward the reference label.
inline double one_nna(const std::vector<PointCloud>& generated,
                      const std::vector<PointCloud>& reference) {
    if (generated.size() != reference.size())
        throw std::invalid_argument("one_nna: set sizes must match");
    std::vector<const PointCloud*> all;
    std::vector<int> label;  // 0 = generated, 1 = reference
    for (const auto& g : generated) {
        all.push_back(&g);
        label.push_back(0);
    }
    for (const auto& r : reference) {
        all.push_back(&r);
        label.push_back(1);
    }
    size_t m = all.size();
    std::vector<std::vector<double>> d(m, std::vector<double>(m, 0));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j) d[i][j] = d[j][i] = chamfer_distance(*all[i], *all[j]);
    int correct = 0;
    for (size_t i = 0; i < m; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_label = -1;
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            if (d[i][j] < best || (d[i][j] == best && label[j] == 1)) {
                best = d[i][j];
                best_label = label[j];
            }
        }
        if (best_label == label[i]) ++correct;
    }
    return static_cast<double>(correct) / m;
}

// Total mutual difference: mean over completions of the average CD to the
// other k-1 completions.
inline double tmd(const std::vector<PointCloud>& completions) {
    size_t k = completions.size();
    if (k < 2) throw std::invalid_argument("tmd: need at least 2 completions");
    double total = 0;
    for (size_t i = 0; i < k; ++i) {
        double s = 0;
        for (size_t j = 0; j < k; ++j)
            if (j != i) s += chamfer_distance(completions[i], completions[j]);
        total += s / (k - 1);
    }
    return total / k;
}

// Mean over completions of the unidirectional Hausdorff distance from the
// partial input.
inline double uhd(const PointCloud& partial, const std::vector<PointCloud>& completions) {
    if (partial.points.empty() || completions.empty())
        throw std::invalid_argument("uhd: empty input");
    double total = 0;
    for (const auto& c : completions) total += hausdorff_unidirectional(partial, c);
    return total / completions.size();
}

// Consistency: mean |s| of predicted signed distances at the partial points.
// `sdf` is the trained decoder bound to one latent. The signed variant (plain
// mean, cancellation possible) is available behind the flag.
inline double cons(const PointCloud& partial,
                   const std::function<std::vector<double>(const std::vector<Vec3>&)>& sdf,
                   bool signed_mean = false) {
    std::vector<double> values = sdf(partial.points);
    double total = 0;
    for (double v : values) total += signed_mean ? v : std::fabs(v);
    return total / values.size();
}

}  // namespace dsdf
