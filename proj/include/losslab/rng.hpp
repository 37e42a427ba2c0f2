#pragma once

#include <cstdint>
#include <random>

namespace losslab {

/// Engine used for every stochastic stream in the library.
using Engine = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives the seed of stream `index` under `master`.
///
/// seed = splitmix64(splitmix64(master) ^ (index * golden)), so neighbouring
/// indices land far apart and stream i never depends on how trials are
/// partitioned across workers.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ull));
}

inline Engine make_engine(std::uint64_t master, std::uint64_t index) {
  return Engine(derive_seed(master, index));
}

}  // namespace losslab
