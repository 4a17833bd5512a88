#pragma once

#include <cstdint>
#include <random>

namespace lebid {

using Rng = std::mt19937_64;

// splitmix64 finalizer over (root, stream): independent, reproducible
// sub-seeds for runs, estimators and EB iterations.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream)
{
    std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng)
{
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace lebid
