#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace splatgrasp {

// Seeded generator with explicit real mappings. The std distributions are
// implementation-defined, which would break byte-stable outputs across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : mEngine(seed) {}

    std::uint64_t bits() { return mEngine(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection sampling removes modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = mEngine();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller (no cached second value).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 mEngine;
};

} // namespace splatgrasp
