#include "tailstop/stop_tests.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "tailstop/rng.hpp"
#include "testutil.hpp"

using namespace tailstop;

TEST(Exponentiality, ZeroVarianceTopKPasses) {
  std::vector<std::uint64_t> deltas{1, 2, 5, 5, 5, 5, 5, 3, 0, 1};
  ExpTestConfig cfg{5, 5};
  const auto res = exponentiality_test(deltas, cfg);
  EXPECT_TRUE(res.passed);
  ASSERT_EQ(res.cv_trace.size(), 1u);
  EXPECT_EQ(res.cv_trace[0].k, 5u);
  EXPECT_DOUBLE_EQ(res.cv_trace[0].cv, 0.0);
  EXPECT_DOUBLE_EQ(res.cv_trace[0].bound, 1.05);
  EXPECT_FALSE(res.failing_k.has_value());
}

TEST(Exponentiality, BoundAtK25) {
  std::vector<std::uint64_t> deltas(30, 1);
  deltas[0] = 2;  // avoid the degenerate all-equal-zero case only
  ExpTestConfig cfg{25, 25};
  const auto res = exponentiality_test(deltas, cfg);
  ASSERT_EQ(res.cv_trace.size(), 1u);
  EXPECT_DOUBLE_EQ(res.cv_trace[0].bound, 1.01);
}

TEST(Exponentiality, ShortInputFailsImmediately) {
  std::vector<std::uint64_t> deltas(99, 1);
  const auto res = exponentiality_test(deltas, ExpTestConfig{10, 100});
  EXPECT_FALSE(res.passed);
  EXPECT_TRUE(res.cv_trace.empty());
  EXPECT_FALSE(res.failing_k.has_value());
}

TEST(Exponentiality, DegenerateAllZero) {
  std::vector<std::uint64_t> deltas(200, 0);
  EXPECT_THROW(exponentiality_test(deltas, ExpTestConfig{10, 100}),
               DegenerateTailError);
}

TEST(Exponentiality, ConfigValidation) {
  std::vector<std::uint64_t> deltas(200, 1);
  EXPECT_THROW(exponentiality_test(deltas, ExpTestConfig{1, 100}), ConfigError);
  EXPECT_THROW(exponentiality_test(deltas, ExpTestConfig{50, 10}), ConfigError);
}

TEST(Exponentiality, FailureRecordsTraceUpToFailingK) {
  // heavy synthetic tail: one huge value dominating the top-k
  std::vector<std::uint64_t> deltas(200, 1);
  deltas[17] = 1000000;
  const auto res = exponentiality_test(deltas, ExpTestConfig{10, 100});
  EXPECT_FALSE(res.passed);
  ASSERT_TRUE(res.failing_k.has_value());
  EXPECT_EQ(res.cv_trace.size(), *res.failing_k - 10 + 1);
  EXPECT_GE(res.cv_trace.back().cv, res.cv_trace.back().bound);
}

TEST(Exponentiality, MonteCarloDiscrimination) {
  // exponential streams should pass, Pareto(1) streams should fail
  int exp_pass = 0;
  int pareto_fail = 0;
  const ExpTestConfig cfg{10, 100};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = testutil::exponential_deltas(seed, 10000, 1.0, 100.0);
    if (exponentiality_test(e, cfg).passed) ++exp_pass;
    const auto p = testutil::pareto_deltas(1000 + seed, 10000, 1.0, 100.0);
    if (!exponentiality_test(p, cfg).passed) ++pareto_fail;
  }
  EXPECT_GE(exp_pass, 90);
  EXPECT_GE(pareto_fail, 90);
}

TEST(Exponentiality, PermutationInvariant) {
  auto deltas = testutil::exponential_deltas(5, 500, 2.0);
  const auto before = exponentiality_test(deltas);
  Rng rng(99);
  for (std::size_t i = deltas.size(); i > 1; --i)
    std::swap(deltas[i - 1], deltas[rng.bounded(i)]);
  const auto after = exponentiality_test(deltas);
  EXPECT_EQ(before.passed, after.passed);
  ASSERT_EQ(before.cv_trace.size(), after.cv_trace.size());
  for (std::size_t i = 0; i < before.cv_trace.size(); ++i)
    EXPECT_DOUBLE_EQ(before.cv_trace[i].cv, after.cv_trace[i].cv);
}

TEST(Exponentiality, ScaleFreeAndShiftMonotone) {
  const auto deltas = testutil::exponential_deltas(6, 2000, 2.0);
  const auto base = exponentiality_test(deltas);

  auto scaled = deltas;
  for (auto& d : scaled) d *= 7;
  const auto s = exponentiality_test(scaled);
  EXPECT_EQ(base.passed, s.passed);
  ASSERT_EQ(base.cv_trace.size(), s.cv_trace.size());
  for (std::size_t i = 0; i < base.cv_trace.size(); ++i)
    EXPECT_NEAR(base.cv_trace[i].cv, s.cv_trace[i].cv, 1e-12);

  if (base.passed) {
    auto shifted = deltas;
    for (auto& d : shifted) d += 1000;
    const auto sh = exponentiality_test(shifted);
    EXPECT_TRUE(sh.passed);  // positive shifts only decrease each CV
    for (std::size_t i = 0; i < base.cv_trace.size(); ++i)
      EXPECT_LE(sh.cv_trace[i].cv, base.cv_trace[i].cv + 1e-12);
  }
}

TEST(Laplace, StopsAfterQuietRun) {
  LaplaceState st{0, 0, 3};
  StepDecision d;
  for (std::uint64_t delta : {5, 2, 2}) {
    std::tie(st, d) = laplace_step(st, delta);
    EXPECT_EQ(d, StepDecision::keep_fuzzing);
  }
  std::tie(st, d) = laplace_step(st, 2);
  EXPECT_EQ(d, StepDecision::stop);
  EXPECT_EQ(st.record_value, 5u);
}

TEST(Laplace, RecordResetsCounter) {
  LaplaceState st{0, 0, 3};
  StepDecision d;
  std::tie(st, d) = laplace_step(st, 5);
  std::tie(st, d) = laplace_step(st, 6);
  EXPECT_EQ(st.record_value, 6u);
  EXPECT_EQ(st.runs_since_record, 0u);
}

TEST(Laplace, StrictlyIncreasingNeverStops) {
  LaplaceState st{0, 0, 5};
  for (std::uint64_t i = 1; i <= 10000; ++i) {
    auto [next, d] = laplace_step(st, i);
    st = next;
    ASSERT_EQ(d, StepDecision::keep_fuzzing);
  }
}

TEST(Laplace, GeometricDecayMatchesReplayOracle) {
  // seeded geometric-decay stream
  Rng rng(42);
  std::vector<std::uint64_t> stream;
  double level = 1e9;
  for (int i = 0; i < 5000; ++i) {
    stream.push_back(static_cast<std::uint64_t>(level * rng.next_double()));
    level *= 0.999;
  }

  LaplaceState st{0, 0, 100};
  std::optional<std::size_t> stop;
  for (std::size_t i = 0; i < stream.size() && !stop; ++i) {
    auto [next, d] = laplace_step(st, stream[i]);
    st = next;
    if (d == StepDecision::stop) stop = i + 1;
  }

  // straightforward offline re-scan: find the first record followed by 100
  // non-exceeding samples
  std::optional<std::size_t> oracle;
  std::uint64_t record = 0;
  std::size_t quiet = 0;
  for (std::size_t i = 0; i < stream.size() && !oracle; ++i) {
    if (stream[i] > record) {
      record = stream[i];
      quiet = 0;
    } else if (++quiet == 100) {
      oracle = i + 1;
    }
  }
  EXPECT_EQ(stop, oracle);
  ASSERT_TRUE(stop.has_value());
}
