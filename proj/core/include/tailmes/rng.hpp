#pragma once

#include <cstdint>
#include <random>

namespace tailmes {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to decorrelate seeds derived from small indices.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for task `index` of a run seeded with `base`: base XOR hash(index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return base ^ mix_seed(index);
}

}  // namespace tailmes
