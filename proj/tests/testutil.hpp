#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tailstop/rng.hpp"

namespace testutil {

/// Exponential draws scaled and rounded to integer deltas.
inline std::vector<std::uint64_t> exponential_deltas(std::uint64_t seed,
                                                     std::size_t n,
                                                     double scale = 1.0,
                                                     double multiplier = 100.0) {
  tailstop::Rng rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& d : out)
    d = static_cast<std::uint64_t>(
        std::llround(rng.exponential(scale) * multiplier));
  return out;
}

/// Pareto draws (x_m = 1) with the given tail index, scaled and rounded.
inline std::vector<std::uint64_t> pareto_deltas(std::uint64_t seed,
                                                std::size_t n, double alpha,
                                                double multiplier = 100.0) {
  tailstop::Rng rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& d : out)
    d = static_cast<std::uint64_t>(
        std::llround(rng.pareto(alpha) * multiplier));
  return out;
}

/// The body+tail mixture: 95% uniform on [0, 30], 5% at 32 + Exp(11).
inline std::vector<std::uint64_t> mixture_deltas(std::uint64_t seed,
                                                 std::size_t n) {
  tailstop::Rng rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& d : out) {
    if (rng.next_double() < 0.95)
      d = static_cast<std::uint64_t>(std::llround(rng.next_double() * 30.0));
    else
      d = static_cast<std::uint64_t>(
          std::llround(32.0 + rng.exponential(11.0)));
  }
  return out;
}

/// iid GPD excesses by inverse CDF.
inline std::vector<double> gpd_excesses(std::uint64_t seed, std::size_t n,
                                        double sigma, double xi) {
  tailstop::Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.gpd(sigma, xi);
  return out;
}

inline std::vector<double> exp_excesses(std::uint64_t seed, std::size_t n,
                                        double sigma) {
  return gpd_excesses(seed, n, sigma, 0.0);
}

}  // namespace testutil
