#pragma once

#include <cstdint>

namespace hcl {

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of item `index` in stream `stream` under a base seed. Streams keep
/// e.g. trial draws and tuning draws apart.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index)
{
    return mix64(mix64(mix64(base) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

namespace streams {
inline constexpr std::uint64_t trial = 0x7472;
inline constexpr std::uint64_t tuning = 0x74756e;
inline constexpr std::uint64_t configuration = 0x636667;
} // namespace streams

} // namespace hcl
