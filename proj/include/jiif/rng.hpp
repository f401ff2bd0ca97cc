#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "jiif/errors.hpp"

namespace jiif {

// Seeded random source with a bit-stable sequence. The standard <random>
// distributions are implementation-defined, so everything that has to be
// reproducible across toolchains goes through this class instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Avoid the short cycles near zero state.
        next_u64();
        next_u64();
    }

    // splitmix64 step.
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int64_t uniform_int(int64_t n) {
        require(n > 0, "uniform_int: n must be positive");
        // Rejection sampling keeps the draw exactly uniform.
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int64_t>(r % un);
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    /// Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        // log(0) guard; u1 = 0 happens with probability 2^-53.
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent stream for a named component.
    Rng split(std::string_view tag) const {
        uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
        for (const char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(mix(state_, h));
    }

    Rng split(uint64_t salt) const { return Rng(mix(state_, salt)); }

    /// Deterministic seed combiner (also used for (epoch, step) stream splits).
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// First `count` entries of a seeded Fisher-Yates pass over [0, n):
/// a uniform sample without replacement.
inline std::vector<int64_t> sample_without_replacement(int64_t n, int64_t count, Rng& rng) {
    require(n >= 0 && count >= 0 && count <= n, "sample_without_replacement: bad sizes");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < count; ++i) {
        const int64_t j = i + rng.uniform_int(n - i);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(count));
    return idx;
}

}  // namespace jiif
