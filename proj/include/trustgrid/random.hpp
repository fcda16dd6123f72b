#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace trustgrid {

/// Seeded generator whose derived draws do not depend on the standard
/// library's distribution implementations, so a seed reproduces the same
/// stream on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling removes modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do x = engine_();
        while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; the second variate is discarded to keep the stream simple.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                          std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Geometric count on {1, 2, ...} with the given mean (>= 1).
    std::uint64_t geometric_at_least_one(double mean) {
        if (mean <= 1.0) return 1;
        const double p = 1.0 / mean;
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace trustgrid
