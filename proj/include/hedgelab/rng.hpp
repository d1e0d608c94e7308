#pragma once

#include <cstdint>
#include <random>

namespace hedgelab {

// splitmix64, used to derive well-separated seeds for per-scenario streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

// Independent stream for (base_seed, index); adding streams later does not
// disturb existing ones.
inline Rng make_stream(std::uint64_t base_seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(base_seed) ^ splitmix64(index + 1)));
}

// Fresh distribution per call: normal_distribution caches a spare deviate,
// and shared cache state would break per-stream reproducibility.
inline double draw_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline int draw_poisson(Rng& rng, double intensity) {
    if (intensity <= 0.0) return 0;
    std::poisson_distribution<int> dist(intensity);
    return dist(rng);
}

inline double draw_uniform(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

}  // namespace hedgelab
