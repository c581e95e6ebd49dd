#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tailstop/errors.hpp"

namespace tailstop {

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of the first sample, midrank tie handling
  double p = 1.0;  // two-sided
  bool exact = false;
};

namespace detail {

/// U statistic for sample a plus the pooled tie-group sizes.
inline std::pair<double, std::vector<std::size_t>> u_statistic(
    std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(a.size() + b.size());
  for (double v : a) pooled.push_back({v, 0});
  for (double v : b) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  std::vector<std::size_t> tie_groups;
  double rank_sum_a = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double midrank = static_cast<double>(i + j + 1) / 2.0;
    std::size_t in_a = 0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) ++in_a;
    rank_sum_a += midrank * static_cast<double>(in_a);
    tie_groups.push_back(j - i);
    i = j;
  }
  const double na = static_cast<double>(a.size());
  const double u_a = rank_sum_a - na * (na + 1.0) / 2.0;
  return {u_a, tie_groups};
}

/// Exact permutation distribution of 2U over all ways to label the pooled
/// multiset. Counts stay below 2^53, so double arithmetic is exact.
inline double exact_two_sided_p(std::span<const double> a,
                                std::span<const double> b, double u_obs) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  std::vector<double> pooled;
  pooled.reserve(n1 + n2);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());

  const std::size_t umax = 2 * n1 * n2;  // table indexed by 2U
  // ways[t][v] = number of labelings with t pooled values assigned to sample
  // a so far and accumulated 2U = v
  std::vector<std::vector<double>> ways(n1 + 1,
                                        std::vector<double>(umax + 1, 0.0));
  ways[0][0] = 1.0;

  std::size_t processed = 0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const std::size_t g = j - i;
    // binomial C(g, s)
    std::vector<double> binom(g + 1, 1.0);
    for (std::size_t s = 1; s <= g; ++s)
      binom[s] = binom[s - 1] * static_cast<double>(g - s + 1) /
                 static_cast<double>(s);
    std::vector<std::vector<double>> next(
        n1 + 1, std::vector<double>(umax + 1, 0.0));
    for (std::size_t t = 0; t <= std::min(n1, processed); ++t) {
      const std::size_t b_before = processed - t;
      for (std::size_t v = 0; v <= umax; ++v) {
        const double w = ways[t][v];
        if (w == 0.0) continue;
        for (std::size_t s = 0; s <= g && t + s <= n1; ++s) {
          // each a-element beats b-elements from earlier groups outright and
          // half-beats ties inside its own group (2U granularity)
          const std::size_t dv = 2 * s * b_before + s * (g - s);
          next[t + s][v + dv] += w * binom[s];
        }
      }
    }
    ways.swap(next);
    processed += g;
    i = j;
  }

  const double center = static_cast<double>(n1 * n2);
  const double dist_obs = std::abs(2.0 * u_obs - center);
  double hits = 0.0;
  double total = 0.0;
  for (std::size_t v = 0; v <= umax; ++v) {
    const double w = ways[n1][v];
    total += w;
    if (std::abs(static_cast<double>(v) - center) >= dist_obs - 1e-9)
      hits += w;
  }
  return hits / total;
}

inline double normal_two_sided_p(double u, double n1, double n2,
                                 double tie_sum) {
  const double n = n1 + n2;
  const double mu = n1 * n2 / 2.0;
  double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace detail

/// Two-sided Mann-Whitney U test with midrank tie handling. Small problems
/// (|a|*|b| <= 400) get the exact permutation p; larger ones use the normal
/// approximation with tie-corrected variance and continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a,
                                        std::span<const double> b) {
  if (a.empty() || b.empty())
    throw EmptyLogError("mann_whitney_u: empty sample");
  auto [u, tie_groups] = detail::u_statistic(a, b);
  MannWhitneyResult res;
  res.u = u;
  if (a.size() * b.size() <= 400) {
    res.exact = true;
    res.p = detail::exact_two_sided_p(a, b, u);
  } else {
    double tie_sum = 0.0;
    for (std::size_t g : tie_groups) {
      const double t = static_cast<double>(g);
      tie_sum += t * t * t - t;
    }
    res.p = detail::normal_two_sided_p(u, static_cast<double>(a.size()),
                                       static_cast<double>(b.size()), tie_sum);
  }
  return res;
}

}  // namespace tailstop
