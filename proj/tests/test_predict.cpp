#include "tailstop/predict.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "tailstop/format.hpp"
#include "tailstop/rng.hpp"
#include "testutil.hpp"

using namespace tailstop;

TEST(QuantileThreshold, NearestRankOnPermutation) {
  std::vector<std::uint64_t> deltas(100);
  std::iota(deltas.begin(), deltas.end(), 1);  // 1..100
  Rng rng(3);
  for (std::size_t i = deltas.size(); i > 1; --i)
    std::swap(deltas[i - 1], deltas[rng.bounded(i)]);

  const auto c = select_threshold_quantile(deltas, 0.95);
  EXPECT_DOUBLE_EQ(c.u, 95.0);
  EXPECT_EQ(c.exceedance_count, 5u);
  EXPECT_EQ(c.method, ThresholdMethod::quantile);
}

TEST(QuantileThreshold, AllEqualHasNoStrictExceedances) {
  std::vector<std::uint64_t> deltas(500, 42);
  EXPECT_THROW(select_threshold_quantile(deltas, 0.95),
               TooFewExceedancesError);
}

TEST(QuantileThreshold, CountMatchesLinearScan) {
  const auto deltas = testutil::exponential_deltas(17, 10000, 2.0);
  const auto c = select_threshold_quantile(deltas, 0.95);
  std::size_t count = 0;
  for (auto d : deltas)
    if (static_cast<double>(d) > c.u) ++count;
  EXPECT_EQ(c.exceedance_count, count);
}

TEST(BootstrapThreshold, ConstantStreamHasNoCandidate) {
  std::vector<std::uint64_t> deltas(2000, 7);
  BootstrapConfig cfg;
  cfg.resamples = 50;
  EXPECT_THROW(select_threshold_bootstrap(deltas, cfg), NoValidCandidateError);
}

TEST(BootstrapThreshold, RecordsAllCandidates) {
  const auto deltas = testutil::mixture_deltas(5, 5000);
  BootstrapConfig cfg;
  cfg.resamples = 100;
  cfg.seed = 5;
  const auto c = select_threshold_bootstrap(deltas, cfg);
  EXPECT_EQ(c.candidate_scores.size(), 25u);  // 0.99 down to 0.75
  EXPECT_DOUBLE_EQ(c.candidate_scores.front().quantile, 0.99);
  EXPECT_DOUBLE_EQ(c.candidate_scores.back().quantile, 0.75);
  EXPECT_GT(c.exceedance_count, 0u);
}

TEST(BootstrapThreshold, PrefersCleanExponentialTail) {
  // 95% uniform body on [0,30], 5% tail at 32 + Exp(11): the chosen
  // threshold should sit at or above the 0.94 empirical quantile
  int good = 0;
  BootstrapConfig cfg;
  cfg.resamples = 200;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto deltas = testutil::mixture_deltas(seed, 5000);
    cfg.seed = seed;
    const auto c = select_threshold_bootstrap(deltas, cfg);
    const double q94 = quantile_nearest_rank(
        std::span<const std::uint64_t>(deltas), 0.94);
    if (c.u >= q94) ++good;
  }
  EXPECT_GE(good, 80);
}

TEST(BootstrapCi, ConstantPipeline) {
  const auto deltas = testutil::exponential_deltas(9, 500, 2.0);
  BootstrapConfig cfg;
  cfg.resamples = 100;
  const auto [lo, hi] =
      bootstrap_ci(deltas, [](std::span<const std::uint64_t>) { return 3.5; },
                   cfg);
  EXPECT_DOUBLE_EQ(lo, 3.5);
  EXPECT_DOUBLE_EQ(hi, 3.5);
}

TEST(BootstrapCi, TooManyFailedReplicates) {
  const auto deltas = testutil::exponential_deltas(9, 500, 2.0);
  BootstrapConfig cfg;
  cfg.resamples = 50;
  EXPECT_THROW(
      bootstrap_ci(deltas,
                   [](std::span<const std::uint64_t>) -> double {
                     throw FitError("always fails");
                   },
                   cfg),
      BootstrapError);
}

TEST(BootstrapCi, WiderSpreadWidensInterval) {
  // same pipeline (0.9-quantile threshold + exponential fit + level) on
  // exponential data with sigma=5 vs sigma=20
  auto pipeline = [](std::span<const std::uint64_t> deltas) {
    const auto c = select_threshold_quantile(deltas, 0.9);
    std::vector<double> ex;
    for (auto d : deltas)
      if (static_cast<double>(d) > c.u)
        ex.push_back(static_cast<double>(d) - c.u);
    const double zeta = static_cast<double>(ex.size()) /
                        static_cast<double>(deltas.size());
    return return_level(fit_exponential(ex, c.u, zeta, 365), 20000);
  };
  int wider = 0;
  BootstrapConfig cfg;
  cfg.resamples = 200;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    const auto narrow = testutil::exponential_deltas(seed, 1500, 5.0, 1.0);
    const auto wide = testutil::exponential_deltas(seed, 1500, 20.0, 1.0);
    const auto [nlo, nhi] = bootstrap_ci(narrow, pipeline, cfg);
    const auto [wlo, whi] = bootstrap_ci(wide, pipeline, cfg);
    if (whi - wlo > nhi - nlo) ++wider;
  }
  EXPECT_GE(wider, 95);
}

TEST(Predict, ConstantDeltasFallBackToMax) {
  std::vector<std::uint64_t> deltas(1000, 9);
  PredictorConfig cfg;
  cfg.boot.resamples = 50;
  const auto pred = predict_wcdiff(deltas, 20000, cfg);
  EXPECT_TRUE(pred.fallback_used);
  EXPECT_DOUBLE_EQ(pred.value, 9.0);
  EXPECT_NE(pred.method.find("fallback"), std::string::npos);
}

TEST(Predict, EmptyInputFails) {
  EXPECT_THROW(predict_wcdiff(std::vector<std::uint64_t>{}, 100, {}),
               EmptyLogError);
}

TEST(Predict, TendsToOverapproximateTrainingMax) {
  // body+exponential-tail mixture with the pp method: the prediction should
  // reach at least the observed training maximum in >= 80 of 100 seeds
  int covered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto deltas = testutil::mixture_deltas(seed, 5000);
    PredictorConfig cfg;
    cfg.method = PredictMethod::pp;
    cfg.threshold = ThresholdMethod::bootstrap;
    cfg.boot.resamples = 200;
    cfg.boot.seed = seed;
    const auto pred = predict_wcdiff(deltas, 20000, cfg);
    const auto mx = *std::max_element(deltas.begin(), deltas.end());
    if (pred.value >= static_cast<double>(mx)) ++covered;
  }
  EXPECT_GE(covered, 80);
}

TEST(Predict, ReproducibleBitExact) {
  const auto deltas = testutil::mixture_deltas(31, 4000);
  PredictorConfig cfg;
  cfg.method = PredictMethod::pp;
  cfg.boot.resamples = 120;
  cfg.boot.seed = 99;
  const auto a = predict_wcdiff(deltas, 20000, cfg);
  const auto b = predict_wcdiff(deltas, 20000, cfg);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_EQ(a.method, b.method);
}

TEST(Predict, CiBracketsValueAndExponentialNeverFallsBackOnShape) {
  const auto deltas = testutil::mixture_deltas(12, 5000);
  PredictorConfig cfg;
  cfg.method = PredictMethod::exponential;
  cfg.threshold = ThresholdMethod::quantile;
  cfg.boot.resamples = 150;
  const auto pred = predict_wcdiff(deltas, 20000, cfg);
  EXPECT_FALSE(pred.fallback_used);
  EXPECT_LE(pred.ci_low, pred.value);
  EXPECT_GE(pred.ci_high, pred.value);
}

TEST(ReportFormat, PaperStyleStrings) {
  EXPECT_EQ(format_interval(73.3, 47.7, 98.9), "73.3 [47.7, 98.9]");
  EXPECT_EQ(format_threshold(32.0, 13, 3226), "u=32 (13/3226 exceedances)");
}
