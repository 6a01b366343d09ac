#pragma once

#include <cmath>
#include <cstdint>

namespace homlab {

// Counter-based randomness: every draw is a pure function of (seed, counters),
// so fields can be evaluated lazily and concurrently in any order.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ b);
}

/// Map a signed cell index to u64 (zig-zag) so negative cells hash distinctly.
inline std::uint64_t zigzag64(std::int64_t i) {
    return (static_cast<std::uint64_t>(i) << 1) ^ static_cast<std::uint64_t>(i >> 63);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Poisson count by inverse-CDF walk; adequate for the small intensities used here.
inline int poisson_count(double lambda, std::uint64_t state) {
    const double u = uniform01(splitmix64(state));
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 256) {
        ++k;
        p *= lambda / k;
        cdf += p;
    }
    return k;
}

}  // namespace homlab
