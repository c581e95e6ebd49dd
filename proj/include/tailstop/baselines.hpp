#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "tailstop/errors.hpp"
#include "tailstop/predict.hpp"
#include "tailstop/stop_tests.hpp"
#include "tailstop/stream.hpp"

namespace tailstop {

struct BaselineConfig {
  double tail_prob = 0.05;       // exceedance probability the bound targets
  double bayes_B = 100.0;        // Bayes factor for "very strong evidence"
  double bayes_theta = 0.95;
  std::uint64_t fixed_training = 1200;  // Markov/Chebyshev training prefix
  bool use_cantelli = false;     // one-sided Chebyshev variant

  void validate() const {
    if (!(tail_prob > 0.0 && tail_prob <= 1.0))
      throw ConfigError("tail_prob must be in (0,1]");
    if (!(bayes_B > 1.0)) throw ConfigError("bayes_B must be > 1");
    if (!(bayes_theta > 0.0 && bayes_theta < 1.0))
      throw ConfigError("bayes_theta must be in (0,1)");
    if (fixed_training == 0) throw ConfigError("fixed_training must be >= 1");
  }
};

/// Markov bound: Pr[delta > k*mean] <= 1/k, evaluated at k = 1/tail_prob.
/// The returned level is exceeded with probability at most tail_prob.
inline Prediction markov_predict(const SummaryStats& stats,
                                 const BaselineConfig& cfg = {}) {
  cfg.validate();
  if (!(stats.mean > 0.0)) throw ConfigError("markov needs a positive mean");
  Prediction p;
  p.value = stats.mean / cfg.tail_prob;
  p.ci_low = p.value;
  p.ci_high = p.value;
  p.method = "markov";
  return p;
}

/// Chebyshev bound Pr(|delta - mean| >= k*std) <= 1/k^2 at k =
/// sqrt(1/tail_prob); the Cantelli variant uses the one-sided k =
/// sqrt(1/tail_prob - 1).
inline Prediction chebyshev_predict(const SummaryStats& stats,
                                    const BaselineConfig& cfg = {}) {
  cfg.validate();
  const double k = cfg.use_cantelli ? std::sqrt(1.0 / cfg.tail_prob - 1.0)
                                    : std::sqrt(1.0 / cfg.tail_prob);
  Prediction p;
  p.value = stats.mean + stats.std * k;
  p.ci_low = p.value;
  p.ci_high = p.value;
  p.method = cfg.use_cantelli ? "chebyshev-cantelli" : "chebyshev";
  return p;
}

/// Minimum run of consecutive non-exceeding samples for the Jeffreys test to
/// accept H0 with Bayes factor B at confidence theta:
/// K = ceil((-log2 B) / (log2 theta)).
inline std::uint64_t jeffreys_min_runs(double B, double theta) {
  if (!(B > 1.0)) throw ConfigError("Bayes factor must be > 1");
  if (!(theta > 0.0 && theta < 1.0))
    throw ConfigError("theta must be in (0,1)");
  const double k = std::ceil(-std::log2(B) / std::log2(theta));
  return k < 1.0 ? 1 : static_cast<std::uint64_t>(k);
}

/// Sequential Bayes-factor monitor for H0: differences stay below the running
/// maximum tau. Accepts after required_K consecutive non-exceeding samples;
/// the associated prediction is tau itself.
struct BayesMonitorState {
  std::uint64_t tau = 0;
  std::uint64_t consecutive_below = 0;
  std::uint64_t required_K = 90;
};

enum class BayesDecision { keep_monitoring, accept_h0 };

inline std::pair<BayesMonitorState, BayesDecision> bayes_monitor_step(
    BayesMonitorState state, std::uint64_t delta) {
  if (delta > state.tau) {
    state.tau = delta;
    state.consecutive_below = 0;
    return {state, BayesDecision::keep_monitoring};
  }
  ++state.consecutive_below;
  return {state, state.consecutive_below == state.required_K
                     ? BayesDecision::accept_h0
                     : BayesDecision::keep_monitoring};
}

}  // namespace tailstop
