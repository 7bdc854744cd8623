#pragma once

#include <cmath>
#include <cstdint>

namespace irrdrift::rng {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counter), so parallel path generation is order-independent
// and bit-reproducible across worker counts.

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    std::uint64_t z = mix64(seed);
    z = mix64(z ^ (stream * 0xc2b2ae3d27d4eb4fULL));
    z = mix64(z ^ (counter * 0x165667b19e3779f9ULL));
    return z;
}

// Uniform in (0,1), 53-bit resolution, never exactly 0 or 1.
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return (static_cast<double>(hash3(seed, stream, counter) >> 11) + 0.5) * 0x1p-53;
}

// Standard normal via Box-Muller; one draw consumes counters 2k and 2k+1.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    double u1 = uniform(seed, stream, 2 * counter);
    double u2 = uniform(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Derives an independent sub-seed, for gluing independent components
// (e.g. the two environment branches) under one user-facing seed.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) {
    return hash3(seed, 0x5eedULL, tag);
}

}  // namespace irrdrift::rng
