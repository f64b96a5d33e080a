#pragma once

#include <cstdint>
#include <random>

namespace unp {

using Rng = std::mt19937_64;

// Independent generator streams carved out of one master seed.
enum class Stream : std::uint64_t {
  environment = 1,
  agent_init = 2,
  exploration = 3,
  evaluation = 4,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for `stream` derived from `master`: mix64(mix64(master) ^ stream * golden).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
  return mix64(mix64(master) ^ (static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL));
}

inline Rng make_rng(std::uint64_t master, Stream stream) {
  return Rng(derive_seed(master, stream));
}

}  // namespace unp
