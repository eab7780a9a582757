#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mmcse {

// Seeded random source with hand-rolled distributions. std::*_distribution
// is implementation-defined, which would make "same seed, same bytes"
// promises fragile across standard libraries; these are pinned.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. One fresh pair per call, second value
    // discarded, so the stream position depends only on the call count.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Integer in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

   private:
    std::mt19937_64 engine_;
};

}  // namespace mmcse
