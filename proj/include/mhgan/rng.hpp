#pragma once

#include <cstdint>
#include <random>

namespace mhgan {

/// Random stream used throughout the library. Every sampling routine takes
/// one of these explicitly; nothing reads a global or wall-clock seed.
using Rng = std::mt19937_64;

/// Independent stream for (seed, index). Streams for different indices are
/// decorrelated through seed_seq mixing, so chain i's draws never depend on
/// how many other chains ran or in what order.
inline Rng substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x6d68u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace mhgan
