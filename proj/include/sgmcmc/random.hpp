#pragma once

#include <cstdint>
#include <random>

#include "sgmcmc/common.hpp"

namespace sgmcmc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-chain streams from a
// base seed without overlapping mt19937 states.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) {
    return Rng(mix_seed(seed));
}

inline Rng split_rng(std::uint64_t base_seed, std::uint64_t stream) {
    return Rng(mix_seed(mix_seed(base_seed) + 0x632be59bd9b4e019ULL * (stream + 1)));
}

// All samplers draw their Gaussian noise through this helper so that a
// hand-coded update sharing the same engine consumes an identical stream.
inline Vector standard_normal_vector(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return gauss(rng);
}

}  // namespace sgmcmc
