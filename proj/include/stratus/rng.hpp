#pragma once

#include <cmath>
#include <cstdint>

namespace stratus {

// PCG32 (XSH-RR variant, O'Neill 2014): 64-bit LCG state with multiplier
// 6364136223846793005 and an odd per-stream increment, 32-bit output.
// Chosen so that every stochastic result in the project is reproducible
// bit-for-bit from (seed, stream) alone, independent of the platform's
// standard library.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = std::uint32_t(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = std::uint32_t(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Integer in [0, n) without modulo bias (Lemire-style rejection).
    std::uint32_t next_below(std::uint32_t n) {
        std::uint64_t m = std::uint64_t(next_u32()) * n;
        std::uint32_t lo = std::uint32_t(m);
        if (lo < n) {
            std::uint32_t t = (0u - n) % n;
            while (lo < t) {
                m = std::uint64_t(next_u32()) * n;
                lo = std::uint32_t(m);
            }
        }
        return std::uint32_t(m >> 32);
    }

    // Standard normal via Box-Muller; one value per call, cached pair.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double(), u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace stratus
