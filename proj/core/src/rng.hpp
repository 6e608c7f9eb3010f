#ifndef STRUCTOSCOPE_SRC_RNG_HPP
#define STRUCTOSCOPE_SRC_RNG_HPP

#include <cstdint>
#include <random>

namespace structoscope::detail {

using Engine = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// [0, 1) with 53 random bits.
inline double uniform01(Engine& eng)
{
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, bound).
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t bound)
{
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(eng);
}

} // namespace structoscope::detail

#endif
