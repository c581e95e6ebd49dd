#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailstop/errors.hpp"
#include "tailstop/format.hpp"
#include "tailstop/fuzz.hpp"
#include "tailstop/mann_whitney.hpp"
#include "tailstop/predict.hpp"
#include "tailstop/stream.hpp"

namespace tailstop {

// ---------------------------------------------------------------------------
// JSON views of the core types (reports and machine-readable results).
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Prediction& p) {
  return {{"value", p.value},          {"ci_low", p.ci_low},
          {"ci_high", p.ci_high},      {"horizon", p.horizon},
          {"method", p.method},        {"fallback_used", p.fallback_used}};
}

inline nlohmann::json to_json(const TailModelParams& m) {
  return {{"kind", to_string(m.kind)},   {"location", m.location},
          {"scale", m.scale},            {"shape", m.shape},
          {"threshold", m.threshold},    {"zeta", m.zeta},
          {"obs_per_period", m.obs_per_period}};
}

inline nlohmann::json to_json(const ThresholdChoice& t) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& c : t.candidate_scores)
    scores.push_back({{"quantile", c.quantile},
                      {"u", c.u},
                      {"score", std::isfinite(c.score) ? nlohmann::json(c.score)
                                                       : nlohmann::json()}});
  return {{"u", t.u},
          {"method", to_string(t.method)},
          {"exceedance_count", t.exceedance_count},
          {"candidate_scores", scores}};
}

inline nlohmann::json to_json(const TailTestResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : r.cv_trace)
    trace.push_back({{"k", p.k}, {"cv", p.cv}, {"bound", p.bound}});
  nlohmann::json j{{"passed", r.passed}, {"cv_trace", trace}};
  j["failing_k"] = r.failing_k ? nlohmann::json(*r.failing_k)
                               : nlohmann::json();
  return j;
}

// ---------------------------------------------------------------------------
// Experiment specification.
// ---------------------------------------------------------------------------

struct TargetSpec {
  std::string kind;  // leak_set | string_equals | straightline
  unsigned width = 12;
  std::uint64_t unit_cost = 100;
  std::size_t len = 32;
  std::uint64_t base = 5;
  std::uint64_t per_char = 3;
  std::uint64_t const_cost = 8;

  DifferentialTarget build() const {
    if (kind == "leak_set") return leak_set_target(width, unit_cost);
    if (kind == "string_equals")
      return string_equals_target(len, base, per_char);
    if (kind == "straightline") return straightline_target(const_cost);
    throw ConfigError("unknown target kind '" + kind + "'");
  }
};

struct ExperimentSpec {
  std::vector<TargetSpec> targets;
  std::vector<PredictorKind> methods;
  std::uint64_t repeats = 5;
  std::uint64_t budget = 20000;
  std::uint64_t horizon = 20000;
  std::uint64_t seed = 1;  // campaign i uses seed + i
  SttKind stt = SttKind::exponentiality;
  ThresholdMethod threshold = ThresholdMethod::bootstrap;
  double quantile = 0.95;
  std::uint64_t check_every = 100;
  SttParams stt_params;
  BootstrapConfig boot;
  BaselineConfig baseline;
  std::uint64_t obs_per_period = 365;
  LogFormat log_format = LogFormat::csv;
  std::filesystem::path output_dir = "out";
  std::size_t workers = 0;  // 0: hardware concurrency
};

inline PredictorKind parse_predictor(const std::string& name) {
  if (name == "evt_exponential") return PredictorKind::evt_exponential;
  if (name == "evt_pp") return PredictorKind::evt_pp;
  if (name == "markov") return PredictorKind::markov;
  if (name == "chebyshev") return PredictorKind::chebyshev;
  if (name == "bayes") return PredictorKind::bayes;
  throw ConfigError("methods: unknown method name '" + name + "'");
}

inline SttKind parse_stt(const std::string& name) {
  if (name == "exponentiality") return SttKind::exponentiality;
  if (name == "laplace") return SttKind::laplace;
  if (name == "none") return SttKind::none;
  throw ConfigError("stt: unknown test name '" + name + "'");
}

inline ThresholdMethod parse_threshold_method(const std::string& name) {
  if (name == "bootstrap") return ThresholdMethod::bootstrap;
  if (name == "quantile") return ThresholdMethod::quantile;
  throw ConfigError("threshold: expected 'bootstrap' or 'quantile', got '" +
                    name + "'");
}

inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
  ExperimentSpec spec;
  if (!j.contains("targets") || !j.at("targets").is_array() ||
      j.at("targets").empty())
    throw ConfigError("targets: need a non-empty array of target specs");
  for (const auto& t : j.at("targets")) {
    TargetSpec ts;
    ts.kind = t.value("kind", "");
    ts.width = t.value("width", ts.width);
    ts.unit_cost = t.value("unit_cost", ts.unit_cost);
    ts.len = t.value("len", ts.len);
    ts.base = t.value("base", ts.base);
    ts.per_char = t.value("per_char", ts.per_char);
    ts.const_cost = t.value("cost", ts.const_cost);
    ts.build();  // validate eagerly
    spec.targets.push_back(ts);
  }
  if (!j.contains("methods") || !j.at("methods").is_array() ||
      j.at("methods").empty())
    throw ConfigError("methods: need a non-empty array of method names");
  for (const auto& m : j.at("methods"))
    spec.methods.push_back(parse_predictor(m.get<std::string>()));
  spec.repeats = j.value("repeats", spec.repeats);
  if (spec.repeats < 1) throw ConfigError("repeats must be >= 1");
  spec.budget = j.value("budget", spec.budget);
  spec.horizon = j.value("horizon", spec.horizon);
  spec.seed = j.value("seed", spec.seed);
  spec.stt = parse_stt(j.value("stt", "exponentiality"));
  spec.threshold = parse_threshold_method(j.value("threshold", "bootstrap"));
  spec.quantile = j.value("quantile", spec.quantile);
  spec.check_every = j.value("check_every", spec.check_every);
  spec.stt_params.exp.k_min = j.value("k_min", spec.stt_params.exp.k_min);
  spec.stt_params.exp.k_max = j.value("k_max", spec.stt_params.exp.k_max);
  spec.stt_params.quiet_runs = j.value("quiet_runs", spec.stt_params.quiet_runs);
  spec.boot.resamples = j.value("resamples", spec.boot.resamples);
  spec.boot.ci_level = j.value("ci_level", spec.boot.ci_level);
  spec.boot.block_resampling =
      j.value("block_resampling", spec.boot.block_resampling);
  spec.baseline.tail_prob = j.value("tail_prob", spec.baseline.tail_prob);
  spec.baseline.bayes_B = j.value("bayes_B", spec.baseline.bayes_B);
  spec.baseline.bayes_theta = j.value("bayes_theta", spec.baseline.bayes_theta);
  spec.baseline.fixed_training =
      j.value("fixed_training", spec.baseline.fixed_training);
  spec.obs_per_period = j.value("obs_per_period", spec.obs_per_period);
  if (j.value("format", "csv") == std::string("jsonl"))
    spec.log_format = LogFormat::jsonl;
  spec.output_dir = j.value("output_dir", spec.output_dir.string());
  spec.workers = j.value("workers", spec.workers);
  return spec;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec file is not valid JSON: ") + e.what());
  }
  return parse_experiment_spec(j);
}

inline FuzzConfig make_fuzz_config(const ExperimentSpec& spec,
                                   PredictorKind method, std::uint64_t seed) {
  FuzzConfig cfg;
  cfg.budget = spec.budget;
  cfg.seed = seed;
  cfg.stt = spec.stt;
  cfg.stt_params = spec.stt_params;
  cfg.predictor = method;
  cfg.threshold = spec.threshold;
  cfg.quantile = spec.quantile;
  cfg.horizon = spec.horizon;
  cfg.check_every = spec.check_every;
  cfg.boot = spec.boot;
  cfg.baseline = spec.baseline;
  cfg.obs_per_period = spec.obs_per_period;
  return cfg;
}

// ---------------------------------------------------------------------------
// Campaign execution and results files.
// ---------------------------------------------------------------------------

struct CampaignRecord {
  std::string benchmark;
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t repeat = 0;
  std::string log_file;
  CampaignResult result;
};

inline bool horizon_independent(PredictorKind k) {
  return k == PredictorKind::markov || k == PredictorKind::chebyshev ||
         k == PredictorKind::bayes;
}

inline nlohmann::json to_json(const CampaignRecord& r,
                              const ExperimentSpec& spec) {
  const auto& res = r.result;
  const std::uint64_t n = res.log.samples.size();
  const std::uint64_t n_train = res.stop_index.value_or(n);
  std::uint64_t max_train = 0, max_test = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& slot = i < n_train ? max_train : max_test;
    slot = std::max(slot, res.log.samples[i].delta);
  }
  nlohmann::json j;
  j["benchmark"] = r.benchmark;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["repeat"] = r.repeat;
  j["budget"] = spec.budget;
  j["horizon"] = spec.horizon;
  j["stop_index"] =
      res.stop_index ? nlohmann::json(*res.stop_index) : nlohmann::json();
  j["n_training"] = n_train;
  j["n_testing"] = n - n_train;
  j["max_training"] = max_train;
  j["max_testing"] = max_test;
  j["ground_truth_max"] = res.ground_truth_max;
  j["prediction"] =
      res.prediction ? to_json(*res.prediction) : nlohmann::json();
  j["error_pct"] =
      res.error_pct ? nlohmann::json(*res.error_pct) : nlohmann::json();
  j["perf_gain"] = res.perf_gain;
  j["horizon_independent"] = horizon_independent(parse_predictor(r.method));
  j["threshold"] =
      res.threshold ? to_json(*res.threshold) : nlohmann::json();
  j["model"] = res.model ? to_json(*res.model) : nlohmann::json();
  j["log_file"] = r.log_file;
  return j;
}

/// Run repeats x targets x methods campaigns. Campaigns execute in parallel
/// worker threads; the result order is fixed by a deterministic sort key, so
/// the output does not depend on scheduling.
inline std::vector<CampaignRecord> run_experiment(const ExperimentSpec& spec) {
  struct Job {
    TargetSpec target;
    PredictorKind method;
    std::uint64_t seed;
    std::uint64_t repeat;
  };
  std::vector<Job> jobs;
  std::uint64_t i = 0;
  for (const auto& t : spec.targets)
    for (const auto m : spec.methods)
      for (std::uint64_t r = 0; r < spec.repeats; ++r)
        jobs.push_back({t, m, spec.seed + i++, r});

  std::vector<CampaignRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(
          spec.workers ? spec.workers : std::thread::hardware_concurrency(),
          jobs.size()));
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= jobs.size() || failed.load()) return;
        const auto& job = jobs[idx];
        try {
          auto target = job.target.build();
          auto cfg = make_fuzz_config(spec, job.method, job.seed);
          CampaignRecord rec;
          rec.benchmark = target.name;
          rec.method = to_string(job.method);
          rec.seed = job.seed;
          rec.repeat = job.repeat;
          rec.result = run_campaign(target, cfg);
          rec.log_file = rec.benchmark + "__" + rec.method + "__seed" +
                         std::to_string(job.seed) +
                         (spec.log_format == LogFormat::csv ? ".csv" : ".jsonl");
          records[idx] = std::move(rec);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw Error("campaign failed: " + first_error);

  std::stable_sort(records.begin(), records.end(),
                   [](const CampaignRecord& a, const CampaignRecord& b) {
                     return std::tie(a.benchmark, a.method, a.seed) <
                            std::tie(b.benchmark, b.method, b.seed);
                   });
  return records;
}

inline nlohmann::json protocol_json(const ExperimentSpec& spec) {
  return {{"repeats", spec.repeats},
          {"budget", spec.budget},
          {"horizon", spec.horizon},
          {"seed", spec.seed},
          {"stt", to_string(spec.stt)},
          {"threshold", to_string(spec.threshold)},
          {"quantile", spec.quantile},
          {"check_every", spec.check_every},
          {"k_min", spec.stt_params.exp.k_min},
          {"k_max", spec.stt_params.exp.k_max},
          {"quiet_runs", spec.stt_params.quiet_runs},
          {"resamples", spec.boot.resamples},
          {"ci_level", spec.boot.ci_level},
          {"block_resampling", spec.boot.block_resampling},
          {"tail_prob", spec.baseline.tail_prob},
          {"bayes_B", spec.baseline.bayes_B},
          {"bayes_theta", spec.baseline.bayes_theta},
          {"fixed_training", spec.baseline.fixed_training},
          {"obs_per_period", spec.obs_per_period}};
}

/// Write per-campaign logs plus results.json into spec.output_dir.
/// Everything written is deterministic for a fixed spec (no timestamps).
inline std::filesystem::path write_experiment_outputs(
    const ExperimentSpec& spec, const std::vector<CampaignRecord>& records) {
  std::filesystem::create_directories(spec.output_dir);
  nlohmann::json campaigns = nlohmann::json::array();
  for (const auto& rec : records) {
    emit(rec.result.log, spec.output_dir / rec.log_file, spec.log_format);
    campaigns.push_back(to_json(rec, spec));
  }
  nlohmann::json results{{"protocol", protocol_json(spec)},
                         {"campaigns", campaigns}};
  const auto path = spec.output_dir / "results.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << results.dump(2) << "\n";
  return path;
}

// ---------------------------------------------------------------------------
// Comparison of predictors (Mann-Whitney winners).
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
  ms.std = std::sqrt(var / static_cast<double>(xs.size()));
  return ms;
}

struct ComparisonRow {
  std::string benchmark;
  std::string method;
  MeanStd n_training, max_training, n_testing, max_testing, prediction,
      error_pct;
  double best_error_pct = 0.0;  // signed error with the smallest magnitude
  bool significant_winner = false;
};

/// A method wins a benchmark when no competitor's |error| sample is
/// stochastically smaller at two-sided p < 0.05. Identical samples tie, so
/// several methods can win the same benchmark.
inline std::vector<ComparisonRow> compare_methods(
    const std::vector<nlohmann::json>& campaign_sets) {
  // benchmark -> method -> campaign records
  std::map<std::string, std::map<std::string, std::vector<nlohmann::json>>>
      grouped;
  for (const auto& campaigns : campaign_sets)
    for (const auto& c : campaigns) {
      grouped[c.at("benchmark").get<std::string>()]
             [c.at("method").get<std::string>()]
                 .push_back(c);
    }
  if (grouped.empty()) throw ConfigError("no campaigns to compare");

  // every method must cover the same benchmarks
  std::map<std::string, std::set<std::string>> method_benchmarks;
  for (const auto& [bench, methods] : grouped)
    for (const auto& [method, _] : methods) method_benchmarks[method].insert(bench);
  for (const auto& [method, benches] : method_benchmarks)
    if (benches.size() != grouped.size())
      throw ConfigError("mismatched benchmark sets: method '" + method +
                        "' covers " + std::to_string(benches.size()) + " of " +
                        std::to_string(grouped.size()) + " benchmarks");

  std::vector<ComparisonRow> rows;
  for (const auto& [bench, methods] : grouped) {
    if (methods.size() < 2)
      throw ConfigError("benchmark '" + bench +
                        "' has fewer than 2 method result sets");
    std::map<std::string, std::vector<double>> abs_errors;
    for (const auto& [method, campaigns] : methods) {
      ComparisonRow row;
      row.benchmark = bench;
      row.method = method;
      std::vector<double> nt, mt, ns, ms, pred, err;
      for (const auto& c : campaigns) {
        nt.push_back(c.at("n_training").get<double>());
        mt.push_back(c.at("max_training").get<double>());
        ns.push_back(c.at("n_testing").get<double>());
        ms.push_back(c.at("max_testing").get<double>());
        if (!c.at("prediction").is_null())
          pred.push_back(c.at("prediction").at("value").get<double>());
        if (!c.at("error_pct").is_null())
          err.push_back(c.at("error_pct").get<double>());
      }
      row.n_training = mean_std(nt);
      row.max_training = mean_std(mt);
      row.n_testing = mean_std(ns);
      row.max_testing = mean_std(ms);
      row.prediction = mean_std(pred);
      row.error_pct = mean_std(err);
      if (!err.empty())
        row.best_error_pct = *std::min_element(
            err.begin(), err.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });
      for (double e : err) abs_errors[method].push_back(std::abs(e));
      rows.push_back(std::move(row));
    }
    // winner marking
    for (auto& row : rows) {
      if (row.benchmark != bench) continue;
      const auto& own = abs_errors[row.method];
      if (own.empty()) {
        row.significant_winner = false;
        continue;
      }
      bool beaten = false;
      for (const auto& [other, sample] : abs_errors) {
        if (other == row.method || sample.empty()) continue;
        const auto mw = mann_whitney_u(sample, own);
        // `sample` stochastically smaller than `own`: U of `sample` below
        // the n1*n2/2 midpoint and the difference significant
        const double mid =
            static_cast<double>(sample.size() * own.size()) / 2.0;
        if (mw.p < 0.05 && mw.u < mid) {
          beaten = true;
          break;
        }
      }
      row.significant_winner = !beaten;
    }
  }
  return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out =
      "benchmark,method,n_training_mean,n_training_std,max_training_mean,"
      "max_training_std,n_testing_mean,n_testing_std,max_testing_mean,"
      "max_testing_std,prediction_mean,prediction_std,error_pct_mean,"
      "error_pct_std,best_error_pct,significant_winner\n";
  for (const auto& r : rows) {
    out += r.benchmark + "," + r.method + ",";
    out += format_shortest(r.n_training.mean) + "," +
           format_shortest(r.n_training.std) + ",";
    out += format_shortest(r.max_training.mean) + "," +
           format_shortest(r.max_training.std) + ",";
    out += format_shortest(r.n_testing.mean) + "," +
           format_shortest(r.n_testing.std) + ",";
    out += format_shortest(r.max_testing.mean) + "," +
           format_shortest(r.max_testing.std) + ",";
    out += format_shortest(r.prediction.mean) + "," +
           format_shortest(r.prediction.std) + ",";
    out += format_fixed(r.error_pct.mean) + "," + format_fixed(r.error_pct.std) +
           "," + format_fixed(r.best_error_pct) + ",";
    out += r.significant_winner ? "true" : "false";
    out += "\n";
  }
  return out;
}

inline nlohmann::json comparison_json(const std::vector<ComparisonRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"benchmark", r.benchmark},
                   {"method", r.method},
                   {"n_training", {{"mean", r.n_training.mean}, {"std", r.n_training.std}}},
                   {"max_training", {{"mean", r.max_training.mean}, {"std", r.max_training.std}}},
                   {"n_testing", {{"mean", r.n_testing.mean}, {"std", r.n_testing.std}}},
                   {"max_testing", {{"mean", r.max_testing.mean}, {"std", r.max_testing.std}}},
                   {"prediction", {{"mean", r.prediction.mean}, {"std", r.prediction.std}}},
                   {"error_pct", {{"mean", r.error_pct.mean}, {"std", r.error_pct.std}}},
                   {"best_error_pct", r.best_error_pct},
                   {"significant_winner", r.significant_winner}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Report generation: summary JSON, temporal plot data, return-level curves.
// ---------------------------------------------------------------------------

/// Window used by the temporal plots: prediction vs the ground truth of the
/// next 1,000 fuzzing iterations.
inline constexpr std::uint64_t kTemporalWindow = 1000;

struct CurvePoint {
  std::uint64_t horizon = 0;
  double level = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Return-level curve over a horizon ladder with bootstrap CIs. Each
/// replicate refits once (frozen threshold) and is evaluated at every
/// horizon.
inline std::vector<CurvePoint> return_level_curve(
    std::span<const std::uint64_t> deltas, const TailModelParams& model,
    PredictMethod method, const PredictorConfig& cfg,
    std::span<const std::uint64_t> horizons) {
  std::vector<CurvePoint> curve;
  std::vector<std::vector<double>> replicate_levels(horizons.size());
  for (std::size_t r = 0; r < cfg.boot.resamples; ++r) {
    Rng rng(mix_seed(cfg.boot.seed, 0xc42e, r));
    auto res = cfg.boot.block_resampling
                   ? detail::resample_blocks(deltas, rng)
                   : detail::resample_iid(deltas, rng);
    try {
      const auto m = detail::fit_for_method(method, res, model.threshold, cfg);
      if (!shape_is_valid(m)) continue;
      for (std::size_t h = 0; h < horizons.size(); ++h)
        replicate_levels[h].push_back(return_level(m, horizons[h]));
    } catch (const Error&) {
    }
  }
  const double alpha = 1.0 - cfg.boot.ci_level;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    CurvePoint pt;
    pt.horizon = horizons[h];
    pt.level = return_level(model, horizons[h]);
    auto& lv = replicate_levels[h];
    if (lv.size() * 2 >= cfg.boot.resamples) {
      std::sort(lv.begin(), lv.end());
      pt.ci_low = std::min(
          lv[nearest_rank(alpha / 2.0, lv.size()) - 1], pt.level);
      pt.ci_high = std::max(
          lv[nearest_rank(1.0 - alpha / 2.0, lv.size()) - 1], pt.level);
    } else {
      pt.ci_low = pt.level;
      pt.ci_high = pt.level;
    }
    curve.push_back(pt);
  }
  return curve;
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "horizon,level,ci_low,ci_high\n";
  for (const auto& pt : curve)
    out += std::to_string(pt.horizon) + "," + format_shortest(pt.level) + "," +
           format_shortest(pt.ci_low) + "," + format_shortest(pt.ci_high) +
           "\n";
  return out;
}

/// 1-2-5 ladder of horizons up to and including `top`.
inline std::vector<std::uint64_t> horizon_ladder(std::uint64_t top,
                                                 std::uint64_t min_horizon) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t decade = 1;; decade *= 10) {
    for (std::uint64_t step : {1, 2, 5}) {
      const std::uint64_t h = step * decade;
      if (h >= top) {
        if (out.empty() || out.back() != top) out.push_back(top);
        return out;
      }
      if (h > min_horizon) out.push_back(h);
    }
  }
}

struct TemporalPoint {
  std::uint64_t train_size = 0;
  double prediction = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t ground_truth_next_window = 0;
};

/// Rolling re-prediction over a recorded stream: starting at the stop index,
/// predict the maximum of the next window from each growing prefix and pair
/// it with the max actually observed in that window.
inline std::vector<TemporalPoint> temporal_series(
    std::span<const std::uint64_t> deltas, std::uint64_t start,
    PredictorKind method, const ExperimentSpec& spec, std::uint64_t seed) {
  std::vector<TemporalPoint> out;
  for (std::uint64_t t = start; t + kTemporalWindow <= deltas.size();
       t += kTemporalWindow) {
    TemporalPoint pt;
    pt.train_size = t;
    const auto prefix = deltas.subspan(0, t);
    std::uint64_t window_max = 0;
    for (std::uint64_t i = t; i < t + kTemporalWindow; ++i)
      window_max = std::max(window_max, deltas[i]);
    pt.ground_truth_next_window = window_max;
    try {
      switch (method) {
        case PredictorKind::evt_exponential:
        case PredictorKind::evt_pp: {
          PredictorConfig pc;
          pc.method = method == PredictorKind::evt_pp
                          ? PredictMethod::pp
                          : PredictMethod::exponential;
          pc.threshold = spec.threshold;
          pc.quantile = spec.quantile;
          pc.boot = spec.boot;
          pc.boot.seed = mix_seed(seed, 0x7e3, t);
          pc.obs_per_period = spec.obs_per_period;
          const auto pred = predict_wcdiff(prefix, kTemporalWindow, pc);
          pt.prediction = pred.value;
          pt.ci_low = pred.ci_low;
          pt.ci_high = pred.ci_high;
          break;
        }
        case PredictorKind::markov:
        case PredictorKind::chebyshev: {
          const auto stats = summarize(prefix);
          const auto pred = method == PredictorKind::markov
                                ? markov_predict(stats, spec.baseline)
                                : chebyshev_predict(stats, spec.baseline);
          pt.prediction = pred.value;
          pt.ci_low = pred.value;
          pt.ci_high = pred.value;
          break;
        }
        case PredictorKind::bayes: {
          const auto m = *std::max_element(prefix.begin(), prefix.end());
          pt.prediction = static_cast<double>(m);
          pt.ci_low = pt.prediction;
          pt.ci_high = pt.prediction;
          break;
        }
      }
    } catch (const Error&) {
      const auto m = *std::max_element(prefix.begin(), prefix.end());
      pt.prediction = static_cast<double>(m);
      pt.ci_low = pt.prediction;
      pt.ci_high = pt.prediction;
    }
    out.push_back(pt);
  }
  return out;
}

inline std::string temporal_csv(const std::vector<TemporalPoint>& series) {
  std::string out =
      "train_size,prediction,ci_low,ci_high,ground_truth_next_window\n";
  for (const auto& pt : series)
    out += std::to_string(pt.train_size) + "," +
           format_shortest(pt.prediction) + "," + format_shortest(pt.ci_low) +
           "," + format_shortest(pt.ci_high) + "," +
           std::to_string(pt.ground_truth_next_window) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Offline analysis of a recorded stream, as if the stopping test had run
// live during the campaign.
// ---------------------------------------------------------------------------

struct AnalyzeResult {
  SummaryStats stats;  // whole log
  std::optional<std::uint64_t> stop_index;
  std::uint64_t train_size = 0;  // stop index, or the full log if no stop
  TailTestResult stt_result;     // most recent exponentiality evaluation
  std::optional<LaplaceState> laplace_state;
  PredictionDetail detail;
};

/// Replay the stopping rule over the recorded deltas (checked every
/// cfg.check_every iterations for exponentiality, per-iteration otherwise)
/// and run the configured predictor over the training prefix. When the rule
/// never fires the whole log is treated as training so the fit is still
/// reported.
inline AnalyzeResult analyze_log(const CampaignLog& log,
                                 const FuzzConfig& cfg) {
  if (log.samples.empty()) throw EmptyLogError("analyze: empty log");
  AnalyzeResult out;
  const auto deltas = log.deltas();
  out.stats = summarize(deltas);

  const bool fixed_stop = cfg.predictor == PredictorKind::markov ||
                          cfg.predictor == PredictorKind::chebyshev;
  if (cfg.predictor == PredictorKind::bayes) {
    BayesMonitorState bayes{0, 0, jeffreys_min_runs(cfg.baseline.bayes_B,
                                                    cfg.baseline.bayes_theta)};
    for (std::size_t i = 0; i < deltas.size() && !out.stop_index; ++i) {
      auto [next, decision] = bayes_monitor_step(bayes, deltas[i]);
      bayes = next;
      if (decision == BayesDecision::accept_h0) out.stop_index = i + 1;
    }
  } else if (fixed_stop) {
    if (deltas.size() >= cfg.baseline.fixed_training)
      out.stop_index = cfg.baseline.fixed_training;
  } else if (cfg.stt == SttKind::laplace) {
    LaplaceState st{0, 0, cfg.stt_params.quiet_runs};
    for (std::size_t i = 0; i < deltas.size() && !out.stop_index; ++i) {
      auto [next, decision] = laplace_step(st, deltas[i]);
      st = next;
      if (decision == StepDecision::stop) out.stop_index = i + 1;
    }
    out.laplace_state = st;
  } else if (cfg.stt == SttKind::exponentiality) {
    for (std::size_t i = 0; i < deltas.size() && !out.stop_index; ++i) {
      if ((i + 1) % cfg.check_every != 0) continue;
      if (i + 1 < cfg.stt_params.exp.k_max) continue;
      const std::span<const std::uint64_t> prefix(deltas.data(), i + 1);
      try {
        out.stt_result = exponentiality_test(prefix, cfg.stt_params.exp);
      } catch (const DegenerateTailError&) {
        continue;
      }
      if (out.stt_result.passed) out.stop_index = i + 1;
    }
  }

  out.train_size = out.stop_index.value_or(deltas.size());
  const std::span<const std::uint64_t> prefix(deltas.data(), out.train_size);

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
      pc.obs_per_period = cfg.obs_per_period;
      out.detail = predict_wcdiff_detail(prefix, cfg.horizon, pc);
      break;
    }
    case PredictorKind::markov:
    case PredictorKind::chebyshev: {
      const auto stats = summarize(prefix);
      out.detail.prediction = cfg.predictor == PredictorKind::markov
                                  ? markov_predict(stats, cfg.baseline)
                                  : chebyshev_predict(stats, cfg.baseline);
      out.detail.prediction.horizon = cfg.horizon;
      break;
    }
    case PredictorKind::bayes: {
      const auto m = *std::max_element(prefix.begin(), prefix.end());
      out.detail.prediction.value = static_cast<double>(m);
      out.detail.prediction.ci_low = out.detail.prediction.value;
      out.detail.prediction.ci_high = out.detail.prediction.value;
      out.detail.prediction.method = "bayes";
      out.detail.prediction.horizon = cfg.horizon;
      break;
    }
  }
  return out;
}

}  // namespace tailstop
