#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace bnsc {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` of `master`. Work split by index stays
/// reproducible no matter which thread handles it.
constexpr Seed derive_seed(Seed master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(Seed seed) { return Rng(mix64(seed)); }

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Index drawn from a probability vector by inversion.
inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  double u = uniform01(rng);
  const int last = static_cast<int>(probs.size()) - 1;
  for (int i = 0; i < last; ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return last;
}

inline void sample_dirichlet(std::span<const double> alpha, Rng& rng,
                             std::span<double> out) {
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    out[i] = gamma(rng);
    total += out[i];
  }
  if (total <= 0.0) {
    // every gamma draw underflowed (tiny concentrations)
    for (double& v : out) v = 0.0;
    out[rng() % out.size()] = 1.0;
    return;
  }
  for (double& v : out) v /= total;
}

inline std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                            Rng& rng) {
  std::vector<double> out(alpha.size());
  sample_dirichlet(alpha, rng, out);
  return out;
}

}  // namespace bnsc
