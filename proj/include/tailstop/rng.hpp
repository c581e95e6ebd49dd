#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace tailstop {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combine a seed with stream labels into a fresh 64-bit seed. Used to give
/// bootstrap replicates and campaign repeats independent deterministic
/// streams: same inputs, same sub-seed, on every platform.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(s);
  s ^= b + 0xd1b54a32d192ed03ULL;
  h ^= splitmix64(s);
  s ^= c + 0x8cb92ba72f3d8dd7ULL;
  h ^= splitmix64(s);
  return h;
}

/// xoshiro256** with splitmix64 seeding. The standard library engines are
/// deterministic, but the <random> distributions are not pinned across
/// implementations; everything here is, so seeded runs are bit-identical.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t bounded(std::uint64_t bound) {
    // multiply-shift; the tiny modulo bias is irrelevant here and the
    // result is reproducible everywhere
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Exponential with the given scale (mean).
  double exponential(double scale) {
    return -scale * std::log1p(-next_double());
  }

  /// Pareto with x_m = 1 and the given tail index alpha: P(X > x) = x^-alpha.
  double pareto(double alpha) {
    return std::pow(1.0 - next_double(), -1.0 / alpha);
  }

  /// Generalized Pareto excess via inverse CDF; xi = 0 is exponential.
  double gpd(double scale, double shape) {
    if (shape == 0.0) return exponential(scale);
    return scale / shape * (std::pow(1.0 - next_double(), -shape) - 1.0);
  }

  /// Poisson via inversion-by-multiplication; fine for the moderate means
  /// used in tests.
  std::uint64_t poisson(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace tailstop
