#pragma once

// Portable random helpers. std::mt19937_64 output is fully specified by the
// standard, but the std distributions are not, so seeded artifacts draw
// through these instead.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace recomed {

using Rng = std::mt19937_64;

// Uniform integer in [0, bound). bound must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound) - 1;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace recomed
