#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailstop/baselines.hpp"
#include "tailstop/errors.hpp"
#include "tailstop/predict.hpp"
#include "tailstop/rng.hpp"
#include "tailstop/stop_tests.hpp"
#include "tailstop/stream.hpp"

namespace tailstop {

/// A deterministic cost oracle standing in for an instrumented program:
/// cost(x, z) is a pure function of the public input x and secret input z.
struct DifferentialTarget {
  std::string name;
  std::size_t public_len = 0;
  std::size_t secret_len = 0;
  std::function<std::uint64_t(std::span<const std::uint8_t>,
                              std::span<const std::uint8_t>)>
      cost;
};

/// Secret-dependent loop leaking the number of set bits: cost is
/// unit_cost * popcount of the secret masked to `width` bits. The public
/// input is ignored.
inline DifferentialTarget leak_set_target(unsigned width,
                                          std::uint64_t unit_cost) {
  if (width < 12 || width > 32)
    throw ConfigError("leak_set width must be in [12, 32]");
  const std::uint32_t mask =
      width == 32 ? 0xffffffffu : (std::uint32_t{1} << width) - 1;
  DifferentialTarget t;
  t.name = "leak_set_" + std::to_string(width);
  t.public_len = 0;
  t.secret_len = (width + 7) / 8;
  t.cost = [mask, unit_cost](std::span<const std::uint8_t>,
                             std::span<const std::uint8_t> z) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < z.size() && i < 4; ++i)
      v |= static_cast<std::uint32_t>(z[i]) << (8 * i);
    return unit_cost * static_cast<std::uint64_t>(std::popcount(v & mask));
  };
  return t;
}

/// Early-exit string comparison: cost grows with the number of leading
/// positions where the public guess agrees with the secret (+1 for the
/// length check).
inline DifferentialTarget string_equals_target(std::size_t len,
                                               std::uint64_t base,
                                               std::uint64_t per_char) {
  if (len == 0) throw ConfigError("string_equals len must be >= 1");
  DifferentialTarget t;
  t.name = "string_equals_" + std::to_string(len);
  t.public_len = len;
  t.secret_len = len;
  t.cost = [len, base, per_char](std::span<const std::uint8_t> x,
                                 std::span<const std::uint8_t> z) {
    std::size_t agree = 0;
    while (agree < len && x[agree] == z[agree]) ++agree;
    return base + per_char * static_cast<std::uint64_t>(agree + 1);
  };
  return t;
}

/// Constant cost regardless of input; every delta is zero.
inline DifferentialTarget straightline_target(std::uint64_t const_cost) {
  DifferentialTarget t;
  t.name = "straightline";
  t.public_len = 1;
  t.secret_len = 1;
  t.cost = [const_cost](std::span<const std::uint8_t>,
                        std::span<const std::uint8_t>) { return const_cost; };
  return t;
}

enum class SttKind { exponentiality, laplace, none };

inline const char* to_string(SttKind s) {
  switch (s) {
    case SttKind::exponentiality: return "exponentiality";
    case SttKind::laplace: return "laplace";
    case SttKind::none: return "none";
  }
  return "?";
}

enum class PredictorKind { evt_exponential, evt_pp, markov, chebyshev, bayes };

inline const char* to_string(PredictorKind p) {
  switch (p) {
    case PredictorKind::evt_exponential: return "evt_exponential";
    case PredictorKind::evt_pp: return "evt_pp";
    case PredictorKind::markov: return "markov";
    case PredictorKind::chebyshev: return "chebyshev";
    case PredictorKind::bayes: return "bayes";
  }
  return "?";
}

struct SttParams {
  ExpTestConfig exp;
  std::uint64_t quiet_runs = 100;  // Laplace j
};

struct FuzzConfig {
  std::uint64_t budget = 20000;
  std::uint64_t seed = 0;
  SttKind stt = SttKind::exponentiality;
  SttParams stt_params;
  PredictorKind predictor = PredictorKind::evt_pp;
  ThresholdMethod threshold = ThresholdMethod::bootstrap;
  double quantile = 0.95;
  std::uint64_t horizon = 20000;
  std::uint64_t check_every = 100;
  BootstrapConfig boot;
  BaselineConfig baseline;
  std::uint64_t obs_per_period = 365;

  void validate() const {
    if (check_every < 1 || budget < check_every)
      throw ConfigError("need budget >= check_every >= 1");
    stt_params.exp.validate();
    baseline.validate();
    boot.validate();
  }
};

struct CampaignResult {
  CampaignLog log;
  std::optional<std::uint64_t> stop_index;  // samples observed at the stop
  std::optional<Prediction> prediction;
  std::optional<ThresholdChoice> threshold;
  std::optional<TailModelParams> model;
  std::uint64_t ground_truth_max = 0;  // max delta over the full budget
  std::optional<double> error_pct;
  std::uint64_t perf_gain = 0;  // cost units of all post-stop iterations
};

struct InputTriple {
  std::vector<std::uint8_t> x;
  std::vector<std::uint8_t> z1;
  std::vector<std::uint8_t> z2;
};

/// One random mutation, uniformly chosen: flip a bit of z1 or z2, replace a
/// byte of z1 or z2, swap the secrets, or flip a bit of x. With a zero-length
/// public input the x mutation is skipped. Lengths are preserved.
inline InputTriple mutate(InputTriple triple, Rng& rng) {
  const std::uint64_t ops = triple.x.empty() ? 4 : 5;
  switch (rng.bounded(ops)) {
    case 0: {
      const auto bit = rng.bounded(triple.z1.size() * 8);
      triple.z1[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      break;
    }
    case 1: {
      const auto bit = rng.bounded(triple.z2.size() * 8);
      triple.z2[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      break;
    }
    case 2: {
      auto& z = rng.bounded(2) == 0 ? triple.z1 : triple.z2;
      z[rng.bounded(z.size())] = static_cast<std::uint8_t>(rng.bounded(256));
      break;
    }
    case 3:
      std::swap(triple.z1, triple.z2);
      break;
    case 4: {
      const auto bit = rng.bounded(triple.x.size() * 8);
      triple.x[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      break;
    }
  }
  return triple;
}

namespace detail {

inline std::vector<std::uint8_t> random_bytes(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.bounded(256));
  return out;
}

inline std::string triple_id(const InputTriple& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) h = (h ^ b) * 0x100000001b3ULL;
    h = (h ^ 0xff) * 0x100000001b3ULL;
  };
  feed(t.x);
  feed(t.z1);
  feed(t.z2);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

struct CorpusEntry {
  InputTriple triple;
  std::int64_t delta = -1;  // sentinel: any observed delta beats it
};

}  // namespace detail

/// Run one differential fuzzing campaign. Each iteration mutates a parent
/// triple (the best so far with probability 0.8, otherwise uniform from a
/// 16-slot reservoir of accepted triples), records delta = |cost1 - cost2|,
/// and keeps the child when it beats its parent. Every check_every
/// iterations the stopping test runs; on a pass the configured predictor is
/// invoked over the prefix and fuzzing continues to the full budget so the
/// ground-truth maximum and the saved cost of the skipped iterations can be
/// recorded.
///
/// Stopping rules per predictor: the EVT predictors use cfg.stt; the Bayes
/// monitor is its own stopping rule (K = jeffreys_min_runs); Markov and
/// Chebyshev use the fixed training prefix from cfg.baseline.
inline CampaignResult run_campaign(const DifferentialTarget& target,
                                   const FuzzConfig& cfg) {
  cfg.validate();
  CampaignResult res;
  res.log.meta["target"] = target.name;
  res.log.meta["seed"] = std::to_string(cfg.seed);
  res.log.meta["budget"] = std::to_string(cfg.budget);
  res.log.meta["predictor"] = to_string(cfg.predictor);
  res.log.meta["stt"] = to_string(cfg.stt);

  Rng rng(cfg.seed);
  detail::CorpusEntry best;
  best.triple.x = detail::random_bytes(target.public_len, rng);
  best.triple.z1 = detail::random_bytes(target.secret_len, rng);
  best.triple.z2 = detail::random_bytes(target.secret_len, rng);
  std::vector<detail::CorpusEntry> reservoir;
  std::uint64_t accepted = 0;

  LaplaceState laplace{0, 0, cfg.stt_params.quiet_runs};
  BayesMonitorState bayes{
      0, 0, jeffreys_min_runs(cfg.baseline.bayes_B, cfg.baseline.bayes_theta)};

  std::vector<std::uint64_t> deltas;
  deltas.reserve(cfg.budget);
  res.log.samples.reserve(cfg.budget);

  const bool fixed_stop = cfg.predictor == PredictorKind::markov ||
                          cfg.predictor == PredictorKind::chebyshev;

  for (std::uint64_t i = 0; i < cfg.budget; ++i) {
    const bool exploit = rng.next_double() < 0.8 || reservoir.empty();
    const detail::CorpusEntry& parent =
        exploit ? best : reservoir[rng.bounded(reservoir.size())];
    auto child = mutate(parent.triple, rng);
    const std::uint64_t cost1 = target.cost(child.x, child.z1);
    const std::uint64_t cost2 = target.cost(child.x, child.z2);
    const std::uint64_t delta = cost1 > cost2 ? cost1 - cost2 : cost2 - cost1;

    res.log.samples.push_back(
        DiffSample::make(i, cost1, cost2, detail::triple_id(child)));
    deltas.push_back(delta);

    if (static_cast<std::int64_t>(delta) > parent.delta) {
      detail::CorpusEntry entry{child, static_cast<std::int64_t>(delta)};
      if (entry.delta > best.delta) best = entry;
      ++accepted;
      if (reservoir.size() < 16) {
        reservoir.push_back(std::move(entry));
      } else {
        const auto slot = rng.bounded(accepted);
        if (slot < 16) reservoir[slot] = std::move(entry);
      }
    }

    if (res.stop_index) {
      res.perf_gain += cost1 + cost2;
      continue;
    }

    bool stop_now = false;
    switch (cfg.predictor) {
      case PredictorKind::bayes: {
        auto [next, decision] = bayes_monitor_step(bayes, delta);
        bayes = next;
        stop_now = decision == BayesDecision::accept_h0;
        break;
      }
      case PredictorKind::markov:
      case PredictorKind::chebyshev:
        stop_now = i + 1 == cfg.baseline.fixed_training;
        break;
      default:
        if (cfg.stt == SttKind::laplace) {
          auto [next, decision] = laplace_step(laplace, delta);
          laplace = next;
          stop_now = decision == StepDecision::stop;
        } else if (cfg.stt == SttKind::exponentiality &&
                   (i + 1) % cfg.check_every == 0 &&
                   deltas.size() >= cfg.stt_params.exp.k_max) {
          try {
            stop_now = exponentiality_test(deltas, cfg.stt_params.exp).passed;
          } catch (const DegenerateTailError&) {
            stop_now = false;  // all-zero tail: keep fuzzing
          }
        }
        break;
    }
    if (!stop_now) continue;

    res.stop_index = i + 1;
    Prediction pred;
    switch (cfg.predictor) {
      case PredictorKind::evt_exponential:
      case PredictorKind::evt_pp: {
        PredictorConfig pc;
        pc.method = cfg.predictor == PredictorKind::evt_pp
                        ? PredictMethod::pp
                        : PredictMethod::exponential;
        pc.threshold = cfg.threshold;
        pc.quantile = cfg.quantile;
        pc.boot = cfg.boot;
        pc.boot.seed = mix_seed(cfg.seed, 0x5eed, 0);
        pc.obs_per_period = cfg.obs_per_period;
        auto detail_out = predict_wcdiff_detail(deltas, cfg.horizon, pc);
        pred = detail_out.prediction;
        res.threshold = std::move(detail_out.threshold);
        res.model = std::move(detail_out.model);
        break;
      }
      case PredictorKind::markov:
      case PredictorKind::chebyshev:
        try {
          pred = cfg.predictor == PredictorKind::markov
                     ? markov_predict(summarize(deltas), cfg.baseline)
                     : chebyshev_predict(summarize(deltas), cfg.baseline);
        } catch (const Error& e) {
          pred.value = static_cast<double>(
              *std::max_element(deltas.begin(), deltas.end()));
          pred.ci_low = pred.value;
          pred.ci_high = pred.value;
          pred.fallback_used = true;
          pred.method = std::string(to_string(cfg.predictor)) +
                        ";fallback=max(" + e.what() + ")";
        }
        break;
      case PredictorKind::bayes: {
        pred.value = static_cast<double>(bayes.tau);
        pred.ci_low = pred.value;
        pred.ci_high = pred.value;
        pred.method = "bayes";
        break;
      }
    }
    pred.horizon = cfg.horizon;
    res.prediction = std::move(pred);
  }

  for (std::uint64_t d : deltas)
    res.ground_truth_max = std::max(res.ground_truth_max, d);

  if (res.prediction) {
    const double g = static_cast<double>(res.ground_truth_max);
    const double p = res.prediction->value;
    if (res.ground_truth_max > 0)
      res.error_pct = 100.0 * (p - g) / g;
    else if (p == 0.0)
      res.error_pct = 0.0;
  }
  return res;
}

}  // namespace tailstop
