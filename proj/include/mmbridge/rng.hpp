#pragma once

#include <cmath>
#include <cstdint>

#include "mmbridge/common.hpp"

namespace mmbridge {

// Deterministic, portable RNG. std::mt19937_64 is fully specified by the
// standard, but the std distributions are not; all value mappings here are
// spelled out so outputs are bit-identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
        // A couple of warm-up scrambles so nearby seeds decorrelate.
        next();
        next();
    }

    std::uint64_t next() {
        // xorshift64* — small, fast, well understood.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

    /// Standard normal via Box-Muller (both values used, cached).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard the log singularity at u1 == 0.
        if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Derive an independent stream, e.g. one per frame or per sample.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
        return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1)));
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t state_;
    double spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace mmbridge
