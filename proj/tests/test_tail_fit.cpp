#include "tailstop/tail_fit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tailstop/predict.hpp"
#include "tailstop/rng.hpp"
#include "testutil.hpp"

using namespace tailstop;

TEST(FitExponential, MeanIsScale) {
  const std::vector<double> ex{2.0, 4.0};
  const auto p = fit_exponential(ex, 10.0, 0.5, 365);
  EXPECT_DOUBLE_EQ(p.scale, 3.0);
  EXPECT_DOUBLE_EQ(p.shape, 0.0);
  EXPECT_DOUBLE_EQ(p.location, 10.0);
  EXPECT_EQ(p.kind, TailKind::exponential);

  const std::vector<double> eq{7.5, 7.5, 7.5};
  EXPECT_DOUBLE_EQ(fit_exponential(eq, 0.0, 1.0, 365).scale, 7.5);

  EXPECT_THROW(fit_exponential(std::vector<double>{2.0}, 0, 1, 365),
               TooFewExceedancesError);
  EXPECT_THROW(fit_exponential(std::vector<double>{}, 0, 1, 365),
               TooFewExceedancesError);
}

TEST(FitExponential, RecoversWss4jScale) {
  const auto ex = testutil::exp_excesses(21, 5000, 11.4);
  const auto p = fit_exponential(ex, 32.0, 0.004, 365);
  EXPECT_NEAR(p.scale, 11.4, 0.05 * 11.4);
}

TEST(FitGpd, ExponentialLimit) {
  const auto ex = testutil::exp_excesses(33, 5000, 2.0);
  const auto p = fit_gpd(ex, 0.0, 0.05, 365);
  EXPECT_NEAR(p.shape, 0.0, 0.05);
  EXPECT_NEAR(p.scale, 2.0, 0.2);
}

TEST(FitGpd, RecoversNegativeShape) {
  const auto ex = testutil::gpd_excesses(44, 5000, 2.0, -0.2);
  const auto p = fit_gpd(ex, 0.0, 0.05, 365);
  EXPECT_NEAR(p.scale, 2.0, 0.2);
  EXPECT_NEAR(p.shape, -0.2, 0.08);
}

TEST(FitGpd, UniformExcessesGiveBoundedTail) {
  Rng rng(55);
  std::vector<double> ex(5000);
  for (auto& v : ex) v = rng.next_double() * 3.0 + 1e-9;
  const auto p = fit_gpd(ex, 0.0, 0.05, 365);
  EXPECT_LT(p.shape, 0.0);
}

TEST(FitGpd, OptimizerNeverRegressesFromSeed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ex = testutil::gpd_excesses(seed, 2000, 3.0, -0.1);
    const auto seed_fit = detail::gpd_seed(ex);
    const auto p = fit_gpd(ex, 0.0, 0.05, 365);
    EXPECT_LE(detail::gpd_nll(p.scale, p.shape, ex),
              detail::gpd_nll(seed_fit.first, seed_fit.second, ex) + 1e-9);
  }
}

TEST(FitGpd, FiniteDifferenceGradientSmall) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double xi_true = -0.4 + 0.15 * static_cast<double>(seed);
    const auto ex = testutil::gpd_excesses(100 + seed, 2000, 2.0, xi_true);
    const auto p = fit_gpd(ex, 0.0, 0.05, 365);
    const double h = 1e-5;
    const double gs = (detail::gpd_nll(p.scale + h, p.shape, ex) -
                       detail::gpd_nll(p.scale - h, p.shape, ex)) /
                      (2 * h);
    const double gx = (detail::gpd_nll(p.scale, p.shape + h, ex) -
                       detail::gpd_nll(p.scale, p.shape - h, ex)) /
                      (2 * h);
    EXPECT_LT(std::sqrt(gs * gs + gx * gx), 1e-3)
        << "seed " << seed << " xi_true " << xi_true;
  }
}

TEST(FitGpd, TooFewExcesses) {
  const std::vector<double> ex{1, 2, 3};
  EXPECT_THROW(fit_gpd(ex, 0, 1, 365), TooFewExceedancesError);
}

TEST(FitPp, ForwardSimulationRecovery) {
  // exceedances of a point process with mu=36, sigma=11, xi=0 over T=10
  // periods, threshold u=10, body filled below u; n ~ 3000
  const double mu = 36.0, sigma = 11.0, u = 10.0, span_t = 10.0;
  Rng rng(77);
  const double lambda = span_t * std::exp(-(u - mu) / sigma);
  const auto n_exc = rng.poisson(lambda);
  std::vector<double> deltas;
  const std::size_t total = 3000;
  for (std::size_t i = 0; i < n_exc; ++i)
    deltas.push_back(u + rng.exponential(sigma));
  while (deltas.size() < total)
    deltas.push_back(rng.next_double() * u);

  const double zeta =
      static_cast<double>(n_exc) / static_cast<double>(total);
  const auto opp = static_cast<std::uint64_t>(total / span_t);
  const auto p = fit_pp(deltas, u, zeta, opp);
  EXPECT_EQ(p.kind, TailKind::pp);
  EXPECT_NEAR(p.location, mu, 0.15 * mu);
  EXPECT_NEAR(p.scale, sigma, 0.15 * sigma);
  EXPECT_NEAR(p.shape, 0.0, 0.15);
}

TEST(FitPp, SingleExceedanceFails) {
  std::vector<double> deltas(100, 1.0);
  deltas[7] = 50.0;
  EXPECT_THROW(fit_pp(deltas, 10.0, 0.01, 10), TooFewExceedancesError);
}

TEST(ShapeValidity, SignGate) {
  TailModelParams p;
  p.shape = -0.2;
  EXPECT_TRUE(shape_is_valid(p));
  p.shape = 0.0;
  EXPECT_TRUE(shape_is_valid(p));
  p.shape = 0.1;
  EXPECT_FALSE(shape_is_valid(p));
}

TEST(ReturnLevel, ExponentialUnitCases) {
  TailModelParams p;
  p.kind = TailKind::exponential;
  p.threshold = 0.0;
  p.scale = 1.0;
  p.zeta = std::numbers::e / 10.0;
  EXPECT_NEAR(return_level(p, 10), 1.0, 1e-12);  // log e = 1

  p.zeta = 0.5;
  p.threshold = 3.25;
  EXPECT_EQ(return_level(p, 2), 3.25);  // horizon*zeta = 1 -> exactly u

  p.kind = TailKind::gpd;
  p.shape = -0.3;
  EXPECT_EQ(return_level(p, 2), 3.25);
  EXPECT_EQ(return_level(p, 1), 3.25);  // below one expected exceedance
}

TEST(ReturnLevel, MonotoneInHorizonAndBounded) {
  TailModelParams exp_p;
  exp_p.kind = TailKind::exponential;
  exp_p.threshold = 5.0;
  exp_p.scale = 3.0;
  exp_p.zeta = 0.1;

  TailModelParams gpd_p = exp_p;
  gpd_p.kind = TailKind::gpd;
  gpd_p.shape = -0.25;

  TailModelParams pp_p;
  pp_p.kind = TailKind::pp;
  pp_p.location = 30.0;
  pp_p.scale = 8.0;
  pp_p.shape = -0.15;
  pp_p.obs_per_period = 365;

  double prev_e = 0, prev_g = 0, prev_p = 0;
  bool first = true;
  for (std::uint64_t h = 400; h <= 400000; h = h * 3 / 2) {
    const double le = return_level(exp_p, h);
    const double lg = return_level(gpd_p, h);
    const double lp = return_level(pp_p, h);
    if (!first) {
      EXPECT_GE(le, prev_e);
      EXPECT_GE(lg, prev_g);
      EXPECT_GE(lp, prev_p);
    }
    // finite upper endpoint u - sigma/xi for xi < 0
    EXPECT_LE(lg, gpd_p.threshold - gpd_p.scale / gpd_p.shape + 1e-9);
    prev_e = le;
    prev_g = lg;
    prev_p = lp;
    first = false;
  }
}

TEST(ReturnLevel, PpSmallHorizonRejected) {
  TailModelParams p;
  p.kind = TailKind::pp;
  p.obs_per_period = 365;
  EXPECT_THROW(return_level(p, 365), ConfigError);
  EXPECT_THROW(return_level(p, 100), ConfigError);
}

TEST(ReturnLevel, PpGumbelLimitFormula) {
  TailModelParams p;
  p.kind = TailKind::pp;
  p.location = 36.0;
  p.scale = 11.0;
  p.shape = 0.0;
  p.obs_per_period = 365;
  const std::uint64_t horizon = 20000;
  const double m = static_cast<double>(horizon) / 365.0;
  const double expected = 36.0 - 11.0 * std::log(-std::log(1.0 - 1.0 / m));
  EXPECT_NEAR(return_level(p, horizon), expected, 1e-12);
}

TEST(ReturnLevel, CalibratedAgainstEmpiricalMaxima) {
  // exponential stream, sigma=10: the realized max of N draws should fall in
  // [level(N) - 3*sigma, level(N) + 3*sigma] in >= 90% of trials
  TailModelParams p;
  p.kind = TailKind::exponential;
  p.threshold = 0.0;
  p.scale = 10.0;
  p.zeta = 1.0;
  const std::uint64_t n = 5000;
  const double level = return_level(p, n);
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    double mx = 0.0;
    for (std::uint64_t i = 0; i < n; ++i)
      mx = std::max(mx, rng.exponential(10.0));
    if (mx >= level - 30.0 && mx <= level + 30.0) ++inside;
  }
  EXPECT_GE(inside, 180);
}

TEST(ShiftProperty, ThresholdAndLevelsShiftExcessFitsIdentical) {
  const auto base = testutil::exponential_deltas(8, 4000, 1.5, 40.0);
  const std::uint64_t shift = 500;
  auto shifted = base;
  for (auto& d : shifted) d += shift;

  // nearest-rank quantiles shift exactly with the data
  std::vector<std::uint64_t> sb(base.begin(), base.end());
  std::vector<std::uint64_t> ss(shifted.begin(), shifted.end());
  const double ub = quantile_nearest_rank(std::span<const std::uint64_t>(sb), 0.95);
  const double us = quantile_nearest_rank(std::span<const std::uint64_t>(ss), 0.95);
  EXPECT_DOUBLE_EQ(us, ub + static_cast<double>(shift));

  auto excesses = [&](const std::vector<std::uint64_t>& v, double u) {
    std::vector<double> out;
    for (auto d : v)
      if (static_cast<double>(d) > u) out.push_back(static_cast<double>(d) - u);
    return out;
  };
  const auto eb = excesses(base, ub);
  const auto es = excesses(shifted, us);
  ASSERT_EQ(eb.size(), es.size());
  for (std::size_t i = 0; i < eb.size(); ++i) EXPECT_DOUBLE_EQ(eb[i], es[i]);

  const double zeta = static_cast<double>(eb.size()) / base.size();
  const auto pb = fit_exponential(eb, ub, zeta, 365);
  const auto ps = fit_exponential(es, us, zeta, 365);
  EXPECT_DOUBLE_EQ(pb.scale, ps.scale);
  EXPECT_DOUBLE_EQ(return_level(ps, 20000),
                   return_level(pb, 20000) + static_cast<double>(shift));
}
