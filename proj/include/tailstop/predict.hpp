#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tailstop/errors.hpp"
#include "tailstop/rng.hpp"
#include "tailstop/tail_fit.hpp"

namespace tailstop {

enum class ThresholdMethod { bootstrap, quantile };

inline const char* to_string(ThresholdMethod m) {
  return m == ThresholdMethod::bootstrap ? "bootstrap" : "quantile";
}

struct CandidateScore {
  double quantile = 0.0;
  double u = 0.0;
  double score = 0.0;  // +inf when the candidate was skipped
};

struct ThresholdChoice {
  double u = 0.0;
  ThresholdMethod method = ThresholdMethod::quantile;
  std::size_t exceedance_count = 0;
  std::vector<CandidateScore> candidate_scores;
};

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  bool block_resampling = false;  // moving blocks of length ceil(n^(1/3))

  void validate() const {
    if (resamples < 2) throw ConfigError("resamples must be >= 2");
    if (!(ci_level > 0.0 && ci_level < 1.0))
      throw ConfigError("ci_level must be in (0,1)");
  }
};

/// Nearest-rank rank for quantile q of n values: ceil(q*n), snapped when q*n
/// is an integer up to floating-point noise. 1-based, clamped to [1, n].
inline std::size_t nearest_rank(double q, std::size_t n) {
  const double t = q * static_cast<double>(n);
  const double r = std::nearbyint(t);
  const double chosen = std::abs(t - r) < 1e-9 ? r : std::ceil(t);
  const auto rank = static_cast<std::size_t>(std::max(chosen, 1.0));
  return std::min(rank, n);
}

/// Empirical nearest-rank quantile (no interpolation).
template <typename T>
double quantile_nearest_rank(std::span<const T> values, double q) {
  if (values.empty()) throw EmptyLogError("quantile of an empty sequence");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must be in (0,1)");
  std::vector<T> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<double>(sorted[nearest_rank(q, sorted.size()) - 1]);
}

inline ThresholdChoice select_threshold_quantile(
    std::span<const std::uint64_t> deltas, double q = 0.95) {
  const double u = quantile_nearest_rank(deltas, q);
  std::size_t count = 0;
  for (auto d : deltas)
    if (static_cast<double>(d) > u) ++count;
  if (count < 2)
    throw TooFewExceedancesError(
        "only " + std::to_string(count) + " values strictly above the " +
        std::to_string(q) + "-quantile threshold " + std::to_string(u));
  ThresholdChoice c;
  c.u = u;
  c.method = ThresholdMethod::quantile;
  c.exceedance_count = count;
  return c;
}

namespace detail {

inline std::vector<double> resample_with_replacement(
    std::span<const double> data, Rng& rng) {
  std::vector<double> out(data.size());
  for (auto& v : out) v = data[rng.bounded(data.size())];
  return out;
}

/// Draw an iid-with-replacement resample already in ascending order: sorted
/// uniforms generated by exponential spacings index into the sorted data, so
/// the per-resample sort is avoided. The resampled multiset has the same
/// distribution as independent index draws.
inline std::vector<double> resample_sorted(std::span<const double> sorted_data,
                                           Rng& rng) {
  const std::size_t n = sorted_data.size();
  std::vector<double> gaps(n + 1);
  double total = 0.0;
  for (auto& g : gaps) {
    g = rng.exponential(1.0);
    total += g;
  }
  std::vector<double> out;
  out.reserve(n);
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += gaps[i];
    const auto idx = static_cast<std::size_t>(cum / total *
                                              static_cast<double>(n));
    out.push_back(sorted_data[std::min(idx, n - 1)]);
  }
  return out;
}

/// Moving-block resample with block length ceil(n^(1/3)), preserving local
/// dependency structure.
inline std::vector<std::uint64_t> resample_blocks(
    std::span<const std::uint64_t> data, Rng& rng) {
  const std::size_t n = data.size();
  const auto block = static_cast<std::size_t>(
      std::ceil(std::cbrt(static_cast<double>(n))));
  std::vector<std::uint64_t> out;
  out.reserve(n + block);
  while (out.size() < n) {
    const std::size_t start = rng.bounded(n - block + 1);
    for (std::size_t i = 0; i < block; ++i) out.push_back(data[start + i]);
  }
  out.resize(n);
  return out;
}

inline std::vector<std::uint64_t> resample_iid(
    std::span<const std::uint64_t> data, Rng& rng) {
  std::vector<std::uint64_t> out(data.size());
  for (auto& v : out) v = data[rng.bounded(data.size())];
  return out;
}

}  // namespace detail

/// Scan candidate quantiles from 0.99 down to 0.75 and pick the threshold
/// whose bootstrap-resampled GPD shape estimates are most stable. The score
/// is the empirical 95% spread of the resampled shape, relative to
/// |shape| + 0.1 of the full-exceedance fit. Candidates with fewer than
/// kMinExceedances strict exceedances or more than half failed fits are
/// skipped (score +inf). Ties break toward the higher quantile.
inline ThresholdChoice select_threshold_bootstrap(
    std::span<const std::uint64_t> deltas, const BootstrapConfig& cfg = {}) {
  cfg.validate();
  ThresholdChoice choice;
  choice.method = ThresholdMethod::bootstrap;
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::uint64_t> sorted(deltas.begin(), deltas.end());
  std::sort(sorted.begin(), sorted.end());

  for (int per = 99; per >= 75; --per) {
    const double q = static_cast<double>(per) / 100.0;
    const double u =
        static_cast<double>(sorted[nearest_rank(q, sorted.size()) - 1]);
    std::vector<double> excesses;
    for (auto d : deltas) {
      const double x = static_cast<double>(d);
      if (x > u) excesses.push_back(x - u);
    }
    CandidateScore cs;
    cs.quantile = q;
    cs.u = u;
    cs.score = std::numeric_limits<double>::infinity();
    if (excesses.size() >= kMinExceedances) {
      std::vector<double> sorted_exc = excesses;
      std::sort(sorted_exc.begin(), sorted_exc.end());
      const auto full_fit = detail::gpd_pwm(sorted_exc);
      std::vector<double> shapes;
      shapes.reserve(cfg.resamples);
      for (std::size_t r = 0; r < cfg.resamples; ++r) {
        Rng rng(mix_seed(cfg.seed, 0x7452e501dULL,
                         static_cast<std::uint64_t>(per), r));
        const auto res = detail::resample_sorted(sorted_exc, rng);
        if (auto fit = detail::gpd_pwm(res)) shapes.push_back(fit->second);
      }
      if (full_fit && shapes.size() * 2 >= cfg.resamples) {
        std::sort(shapes.begin(), shapes.end());
        const double lo =
            shapes[nearest_rank(0.025, shapes.size()) - 1];
        const double hi =
            shapes[nearest_rank(0.975, shapes.size()) - 1];
        cs.score = (hi - lo) / (std::abs(full_fit->second) + 0.1);
      }
    }
    choice.candidate_scores.push_back(cs);
    if (cs.score < best_score) {
      best_score = cs.score;
      choice.u = cs.u;
      choice.exceedance_count = excesses.size();
    }
  }
  if (!std::isfinite(best_score))
    throw NoValidCandidateError(
        "every candidate quantile in [0.75, 0.99] was skipped");
  return choice;
}

/// Percentile bootstrap of an arbitrary fit-and-return-level pipeline. The
/// pipeline receives a resampled delta sequence and returns a level; throwing
/// marks the replicate failed. At least half the replicates must succeed.
inline std::pair<double, double> bootstrap_ci(
    std::span<const std::uint64_t> deltas,
    const std::function<double(std::span<const std::uint64_t>)>& pipeline,
    const BootstrapConfig& cfg = {}) {
  cfg.validate();
  std::vector<double> levels;
  levels.reserve(cfg.resamples);
  for (std::size_t r = 0; r < cfg.resamples; ++r) {
    Rng rng(mix_seed(cfg.seed, 0xc1b007ULL, r));
    auto res = cfg.block_resampling ? detail::resample_blocks(deltas, rng)
                                    : detail::resample_iid(deltas, rng);
    try {
      const double level = pipeline(res);
      if (std::isfinite(level)) levels.push_back(level);
    } catch (const Error&) {
      // failed replicate
    }
  }
  if (levels.size() * 2 < cfg.resamples)
    throw BootstrapError("only " + std::to_string(levels.size()) + " of " +
                         std::to_string(cfg.resamples) +
                         " bootstrap replicates succeeded");
  std::sort(levels.begin(), levels.end());
  const double alpha = 1.0 - cfg.ci_level;
  const double lo = levels[nearest_rank(alpha / 2.0, levels.size()) - 1];
  const double hi = levels[nearest_rank(1.0 - alpha / 2.0, levels.size()) - 1];
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// End-to-end worst-case difference prediction.
// ---------------------------------------------------------------------------

enum class PredictMethod { exponential, pp };

inline const char* to_string(PredictMethod m) {
  return m == PredictMethod::exponential ? "evt_exponential" : "evt_pp";
}

struct Prediction {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t horizon = 0;
  std::string method;
  bool fallback_used = false;
};

struct PredictorConfig {
  PredictMethod method = PredictMethod::pp;
  ThresholdMethod threshold = ThresholdMethod::bootstrap;
  double quantile = 0.95;  // used by ThresholdMethod::quantile
  BootstrapConfig boot;
  std::uint64_t obs_per_period = 365;
  FitOptions fit;
};

/// Prediction together with the threshold and model that produced it (both
/// absent when the fallback was taken before a fit succeeded).
struct PredictionDetail {
  Prediction prediction;
  std::optional<ThresholdChoice> threshold;
  std::optional<TailModelParams> model;
};

namespace detail {

inline TailModelParams fit_for_method(PredictMethod method,
                                      std::span<const std::uint64_t> deltas,
                                      double u, const PredictorConfig& cfg) {
  std::size_t count = 0;
  std::vector<double> excesses;
  for (auto d : deltas) {
    const double x = static_cast<double>(d);
    if (x > u) {
      ++count;
      excesses.push_back(x - u);
    }
  }
  if (count < cfg.fit.min_exceedances)
    throw TooFewExceedancesError("only " + std::to_string(count) +
                                 " exceedances above threshold");
  const double zeta =
      static_cast<double>(count) / static_cast<double>(deltas.size());
  if (method == PredictMethod::exponential)
    return fit_exponential(excesses, u, zeta, cfg.obs_per_period);
  std::vector<double> as_double(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    as_double[i] = static_cast<double>(deltas[i]);
  return fit_pp(as_double, u, zeta, cfg.obs_per_period, cfg.fit);
}

}  // namespace detail

/// Algorithm: select a threshold, fit the tail, and extrapolate the return
/// level over the horizon with a bootstrap confidence interval. A heavy-tail
/// fit (shape > 0) or any threshold/fit error falls back to the observed
/// maximum, with the reason recorded in the method string.
inline PredictionDetail predict_wcdiff_detail(
    std::span<const std::uint64_t> deltas, std::uint64_t horizon,
    const PredictorConfig& cfg = {}) {
  if (deltas.empty()) throw EmptyLogError("predict_wcdiff: empty input");
  PredictionDetail out;
  Prediction& pred = out.prediction;
  pred.horizon = horizon;
  pred.method = std::string(to_string(cfg.method)) + "+" +
                to_string(cfg.threshold);

  auto fall_back = [&](const std::string& reason) {
    pred.fallback_used = true;
    pred.value = static_cast<double>(*std::max_element(deltas.begin(),
                                                       deltas.end()));
    pred.ci_low = pred.value;
    pred.ci_high = pred.value;
    pred.method += ";fallback=max(" + reason + ")";
  };

  try {
    out.threshold = cfg.threshold == ThresholdMethod::bootstrap
                        ? select_threshold_bootstrap(deltas, cfg.boot)
                        : select_threshold_quantile(deltas, cfg.quantile);
    out.model = detail::fit_for_method(cfg.method, deltas, out.threshold->u, cfg);
  } catch (const Error& e) {
    fall_back(e.what());
    return out;
  }

  if (!shape_is_valid(*out.model)) {
    fall_back("shape " + std::to_string(out.model->shape) + " > 0");
    return out;
  }

  pred.value = return_level(*out.model, horizon);
  const double frozen_u = out.threshold->u;
  try {
    auto pipeline = [&](std::span<const std::uint64_t> resample) {
      const auto model =
          detail::fit_for_method(cfg.method, resample, frozen_u, cfg);
      if (!shape_is_valid(model)) throw FitError("invalid shape in replicate");
      return return_level(model, horizon);
    };
    auto [lo, hi] = bootstrap_ci(deltas, pipeline, cfg.boot);
    pred.ci_low = std::min(lo, pred.value);
    pred.ci_high = std::max(hi, pred.value);
  } catch (const Error& e) {
    pred.ci_low = pred.value;
    pred.ci_high = pred.value;
    pred.method += ";ci-failed(" + std::string(e.what()) + ")";
  }
  return out;
}

inline Prediction predict_wcdiff(std::span<const std::uint64_t> deltas,
                                 std::uint64_t horizon,
                                 const PredictorConfig& cfg = {}) {
  return predict_wcdiff_detail(deltas, horizon, cfg).prediction;
}

}  // namespace tailstop
