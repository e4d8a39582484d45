#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace hierdetect {

using Rng = std::mt19937_64;

/// Independent stream for `(seed, index)`. Streams depend only on the pair,
/// never on which worker draws them.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x68696572u};
  return Rng(seq);
}

/// splitmix64 finalizer; used to derive child seeds for sweep cells.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Circular complex Gaussian with E|z|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  double re = nd(rng);
  double im = nd(rng);
  return {re, im};
}

}  // namespace hierdetect
