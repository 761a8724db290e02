#pragma once

#include <cstdint>
#include <random>

namespace dsdf {

// Seeded RNG handed around explicitly; no ambient randomness anywhere.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double std = 1.0) {
        return std::normal_distribution<double>(mean, std)(engine_);
    }

    // Integer in [0, n).
    uint64_t index(uint64_t n) {
        return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

    // Index-derived substream: stable per-sample streams regardless of how
    // many draws the parent seed has produced elsewhere.
    static Rng with_stream(uint64_t seed, uint64_t stream) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dsdf
