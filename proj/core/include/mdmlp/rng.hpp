#pragma once

#include <cmath>
#include <cstdint>

namespace mdmlp {

// Deterministic counter-based generator (splitmix64). The raw u64 stream is
// identical for a given seed on every platform; floating-point derivations
// go through libm and are stable per platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t rem = (UINT64_MAX % n + 1) % n; // 2^64 mod n
        if (rem == 0) return next_u64() % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x <= UINT64_MAX - rem) return x % n;
        }
    }

    // Standard normal via Box-Muller; caches the paired draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Independent substream, e.g. one per parallel evaluation worker.
    Rng split() { return Rng(next_u64() ^ 0xA02B0C8F1D2E3F45ULL); }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mdmlp
