// tailstop: run differential-fuzzing campaigns with tail-risk stopping rules,
// analyze recorded cost-difference logs, compare predictors, and emit report
// tables and plot data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tailstop/experiment.hpp"
#include "tailstop/format.hpp"
#include "tailstop/fuzz.hpp"
#include "tailstop/predict.hpp"
#include "tailstop/stream.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

tailstop::LogFormat format_from_path(const fs::path& p) {
  return p.extension() == ".jsonl" ? tailstop::LogFormat::jsonl
                                   : tailstop::LogFormat::csv;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tailstop::Error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

int cmd_run(const fs::path& spec_path, const std::string& output_dir,
            std::uint64_t seed_override, bool have_seed) {
  tailstop::ExperimentSpec spec = tailstop::load_experiment_spec(spec_path);
  if (!output_dir.empty()) spec.output_dir = output_dir;
  if (have_seed) spec.seed = seed_override;
  const auto records = tailstop::run_experiment(spec);
  const auto results = tailstop::write_experiment_outputs(spec, records);
  std::cout << "wrote " << records.size() << " campaign logs and "
            << results.string() << "\n";
  return kExitOk;
}

void print_analysis(const tailstop::AnalyzeResult& a,
                    const tailstop::FuzzConfig& cfg) {
  using tailstop::format_fixed;
  std::cout << "== stream ==\n"
            << "  samples " << a.stats.count << ", mean "
            << format_fixed(a.stats.mean) << ", std "
            << format_fixed(a.stats.std) << ", min " << a.stats.min << ", max "
            << a.stats.max << "\n";
  std::cout << "== stopping ==\n  rule " << to_string(cfg.stt) << " / "
            << to_string(cfg.predictor) << ": ";
  if (a.stop_index)
    std::cout << "stopped after " << *a.stop_index << " samples\n";
  else
    std::cout << "never passed; analyzing the full log\n";
  if (!a.stt_result.cv_trace.empty()) {
    const auto& last = a.stt_result.cv_trace.back();
    std::cout << "  last CV check: k=" << last.k << " cv="
              << format_fixed(last.cv, 4) << " bound="
              << format_fixed(last.bound, 4)
              << (a.stt_result.passed ? " (passed)" : " (failed)") << "\n";
  }
  if (a.detail.threshold) {
    const auto& t = *a.detail.threshold;
    std::cout << "== threshold ==\n  "
              << tailstop::format_threshold(t.u, t.exceedance_count,
                                            a.train_size)
              << ", method=" << to_string(t.method) << "\n";
  }
  if (a.detail.model) {
    const auto& m = *a.detail.model;
    std::cout << "== tail model ==\n  kind=" << to_string(m.kind)
              << " location=" << format_fixed(m.location, 3)
              << " scale=" << format_fixed(m.scale, 3)
              << " shape=" << format_fixed(m.shape, 3)
              << " threshold=" << format_fixed(m.threshold, 3)
              << " zeta=" << format_fixed(m.zeta, 4) << " obs_per_period="
              << m.obs_per_period << "\n";
  }
  const auto& p = a.detail.prediction;
  std::cout << "== prediction ==\n  "
            << tailstop::format_interval(p.value, p.ci_low, p.ci_high)
            << " (horizon " << p.horizon << ", method " << p.method << ")\n";
}

int cmd_analyze(const fs::path& log_path, const tailstop::FuzzConfig& cfg,
                const std::string& curve_path, const std::string& format) {
  const auto log = tailstop::ingest(log_path, format_from_path(log_path));
  const auto a = tailstop::analyze_log(log, cfg);

  if (format == "json") {
    json j;
    j["stats"] = {{"count", a.stats.count}, {"mean", a.stats.mean},
                  {"std", a.stats.std},     {"min", a.stats.min},
                  {"max", a.stats.max}};
    j["stop_index"] = a.stop_index ? json(*a.stop_index) : json();
    j["train_size"] = a.train_size;
    j["stt"] = tailstop::to_json(a.stt_result);
    j["threshold"] = a.detail.threshold ? tailstop::to_json(*a.detail.threshold)
                                        : json();
    j["model"] = a.detail.model ? tailstop::to_json(*a.detail.model) : json();
    j["prediction"] = tailstop::to_json(a.detail.prediction);
    std::cout << j.dump(2) << "\n";
  } else {
    print_analysis(a, cfg);
  }

  if (!curve_path.empty()) {
    if (!a.detail.model)
      throw tailstop::Error("no fitted tail model; cannot emit a curve");
    tailstop::PredictorConfig pc;
    pc.method = cfg.predictor == tailstop::PredictorKind::evt_pp
                    ? tailstop::PredictMethod::pp
                    : tailstop::PredictMethod::exponential;
    pc.threshold = cfg.threshold;
    pc.quantile = cfg.quantile;
    pc.boot = cfg.boot;
    pc.obs_per_period = cfg.obs_per_period;
    const auto deltas = log.deltas();
    const std::span<const std::uint64_t> prefix(deltas.data(), a.train_size);
    const auto ladder = tailstop::horizon_ladder(
        cfg.horizon, a.detail.model->kind == tailstop::TailKind::pp
                         ? cfg.obs_per_period
                         : 0);
    const auto curve = tailstop::return_level_curve(
        prefix, *a.detail.model, pc.method, pc, ladder);
    std::ofstream out(curve_path, std::ios::binary);
    if (!out) throw tailstop::Error("cannot write " + curve_path);
    out << tailstop::curve_csv(curve);
    std::cout << "wrote return-level curve to " << curve_path << "\n";
  }
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& result_paths,
                const std::string& out_path, const std::string& format) {
  std::vector<json> campaign_sets;
  for (const auto& p : result_paths) {
    auto j = load_json(p);
    if (!j.contains("campaigns"))
      throw tailstop::ConfigError(p + " is not a results file");
    campaign_sets.push_back(j.at("campaigns"));
  }
  const auto rows = tailstop::compare_methods(campaign_sets);
  std::string text = format == "json"
                         ? tailstop::comparison_json(rows).dump(2) + "\n"
                         : tailstop::comparison_csv(rows);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw tailstop::Error("cannot write " + out_path);
    out << text;
  }
  return kExitOk;
}

int cmd_report(const fs::path& results_path, const fs::path& out_dir,
               std::size_t resamples) {
  const auto results = load_json(results_path);
  if (!results.contains("campaigns") || !results.contains("protocol"))
    throw tailstop::ConfigError(results_path.string() +
                                " is not a results file");
  fs::create_directories(out_dir);
  const fs::path base = results_path.parent_path();

  // reconstruct the parts of the spec the re-predictions need
  tailstop::ExperimentSpec spec;
  const auto& proto = results.at("protocol");
  spec.budget = proto.value("budget", spec.budget);
  spec.horizon = proto.value("horizon", spec.horizon);
  spec.threshold =
      tailstop::parse_threshold_method(proto.value("threshold", "bootstrap"));
  spec.quantile = proto.value("quantile", spec.quantile);
  spec.boot.resamples = resamples ? resamples
                                  : proto.value("resamples", std::size_t{1000});
  spec.boot.ci_level = proto.value("ci_level", spec.boot.ci_level);
  spec.baseline.tail_prob = proto.value("tail_prob", spec.baseline.tail_prob);
  spec.baseline.fixed_training =
      proto.value("fixed_training", spec.baseline.fixed_training);
  spec.obs_per_period = proto.value("obs_per_period", spec.obs_per_period);

  // summary.json: per benchmark/method aggregates including perf_gain totals
  std::map<std::string, std::map<std::string, std::vector<json>>> grouped;
  for (const auto& c : results.at("campaigns"))
    grouped[c.at("benchmark").get<std::string>()]
           [c.at("method").get<std::string>()]
               .push_back(c);
  json summary;
  summary["protocol"] = proto;
  summary["benchmarks"] = json::array();
  for (const auto& [bench, methods] : grouped) {
    json jb{{"benchmark", bench}, {"methods", json::array()}};
    for (const auto& [method, campaigns] : methods) {
      std::vector<double> err, pred, ntrain, gmax;
      std::uint64_t perf_total = 0;
      std::uint64_t stops = 0;
      for (const auto& c : campaigns) {
        perf_total += c.at("perf_gain").get<std::uint64_t>();
        if (!c.at("stop_index").is_null()) ++stops;
        ntrain.push_back(c.at("n_training").get<double>());
        gmax.push_back(c.at("ground_truth_max").get<double>());
        if (!c.at("error_pct").is_null())
          err.push_back(c.at("error_pct").get<double>());
        if (!c.at("prediction").is_null())
          pred.push_back(c.at("prediction").at("value").get<double>());
      }
      const auto e = tailstop::mean_std(err);
      const auto p = tailstop::mean_std(pred);
      const auto nt = tailstop::mean_std(ntrain);
      const auto gm = tailstop::mean_std(gmax);
      jb["methods"].push_back(
          {{"method", method},
           {"repeats", campaigns.size()},
           {"stopped", stops},
           {"perf_gain_total", perf_total},
           {"n_training", {{"mean", nt.mean}, {"std", nt.std}}},
           {"ground_truth_max", {{"mean", gm.mean}, {"std", gm.std}}},
           {"prediction", {{"mean", p.mean}, {"std", p.std}}},
           {"error_pct", {{"mean", e.mean}, {"std", e.std}}},
           {"horizon_independent",
            tailstop::horizon_independent(tailstop::parse_predictor(method))}});
    }
    summary["benchmarks"].push_back(jb);
  }
  {
    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    if (!out) throw tailstop::Error("cannot write summary.json");
    out << summary.dump(2) << "\n";
  }

  // plot data: temporal series and return-level curves per stopped campaign
  std::size_t files = 1;
  for (const auto& c : results.at("campaigns")) {
    if (c.at("stop_index").is_null()) continue;
    const auto log_file = c.at("log_file").get<std::string>();
    const auto log =
        tailstop::ingest(base / log_file, format_from_path(log_file));
    const auto deltas = log.deltas();
    const auto method = tailstop::parse_predictor(
        c.at("method").get<std::string>());
    const auto seed = c.at("seed").get<std::uint64_t>();
    const auto stem = fs::path(log_file).stem().string();

    const auto series = tailstop::temporal_series(
        deltas, c.at("stop_index").get<std::uint64_t>(), method, spec, seed);
    std::ofstream tout(out_dir / (stem + "__temporal.csv"), std::ios::binary);
    tout << tailstop::temporal_csv(series);
    ++files;

    if (!c.at("model").is_null()) {
      tailstop::TailModelParams m;
      const auto& jm = c.at("model");
      const std::string kind = jm.at("kind").get<std::string>();
      m.kind = kind == "pp" ? tailstop::TailKind::pp
               : kind == "gpd" ? tailstop::TailKind::gpd
                               : tailstop::TailKind::exponential;
      m.location = jm.at("location").get<double>();
      m.scale = jm.at("scale").get<double>();
      m.shape = jm.at("shape").get<double>();
      m.threshold = jm.at("threshold").get<double>();
      m.zeta = jm.at("zeta").get<double>();
      m.obs_per_period = jm.at("obs_per_period").get<std::uint64_t>();

      tailstop::PredictorConfig pc;
      pc.method = m.kind == tailstop::TailKind::pp
                      ? tailstop::PredictMethod::pp
                      : tailstop::PredictMethod::exponential;
      pc.threshold = spec.threshold;
      pc.quantile = spec.quantile;
      pc.boot = spec.boot;
      pc.boot.seed = tailstop::mix_seed(seed, 0xcafe, 0);
      pc.obs_per_period = m.obs_per_period;
      const std::span<const std::uint64_t> prefix(
          deltas.data(), c.at("stop_index").get<std::uint64_t>());
      const auto ladder = tailstop::horizon_ladder(
          spec.horizon,
          m.kind == tailstop::TailKind::pp ? m.obs_per_period : 0);
      const auto curve =
          tailstop::return_level_curve(prefix, m, pc.method, pc, ladder);
      std::ofstream cout_(out_dir / (stem + "__curve.csv"), std::ios::binary);
      cout_ << tailstop::curve_csv(curve);
      ++files;
    }
  }
  std::cout << "wrote " << files << " report files to " << out_dir.string()
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tail-risk estimation for differential fuzzing"};
  app.require_subcommand(1);

  // run
  std::string run_spec, run_outdir;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "Run the campaigns in a spec file");
  run->add_option("spec", run_spec, "experiment spec (JSON)")->required();
  run->add_option("--output-dir", run_outdir, "override the spec output_dir");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "override the base seed");

  // analyze
  std::string an_log, an_method = "evt_pp", an_stt = "exponentiality";
  std::string an_threshold = "bootstrap", an_curve, an_format = "csv";
  tailstop::FuzzConfig an_cfg;
  auto* an = app.add_subcommand("analyze", "Analyze a recorded log offline");
  an->add_option("log", an_log, "campaign log (.csv or .jsonl)")->required();
  an->add_option("--method", an_method,
                 "evt_exponential|evt_pp|markov|chebyshev|bayes");
  an->add_option("--stt", an_stt, "exponentiality|laplace|none");
  an->add_option("--threshold", an_threshold, "bootstrap|quantile");
  an->add_option("--quantile", an_cfg.quantile, "quantile threshold level");
  an->add_option("--horizon", an_cfg.horizon, "extrapolation horizon");
  an->add_option("--seed", an_cfg.boot.seed, "bootstrap seed");
  an->add_option("--check-every", an_cfg.check_every, "STT check interval");
  an->add_option("--resamples", an_cfg.boot.resamples, "bootstrap resamples");
  an->add_option("--obs-per-period", an_cfg.obs_per_period,
                 "iterations per return-period unit");
  an->add_option("--curve", an_curve, "write a return-level curve CSV here");
  an->add_option("--format", an_format, "csv|json output");

  // compare
  std::vector<std::string> cmp_paths;
  std::string cmp_out, cmp_format = "csv";
  auto* cmp = app.add_subcommand("compare",
                                 "Compare predictors across results files");
  cmp->add_option("results", cmp_paths, "results.json files")->required();
  cmp->add_option("--out", cmp_out, "write the table here instead of stdout");
  cmp->add_option("--format", cmp_format, "csv|json output");

  // report
  std::string rep_results, rep_out = "report";
  std::size_t rep_resamples = 0;
  auto* rep = app.add_subcommand("report", "Emit summary and plot data");
  rep->add_option("results", rep_results, "results.json")->required();
  rep->add_option("--out", rep_out, "output directory");
  rep->add_option("--resamples", rep_resamples,
                  "override bootstrap resamples for plot CIs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_spec, run_outdir, run_seed,
                             run_seed_opt->count() > 0);
    if (*an) {
      an_cfg.predictor = tailstop::parse_predictor(an_method);
      an_cfg.stt = tailstop::parse_stt(an_stt);
      an_cfg.threshold = tailstop::parse_threshold_method(an_threshold);
      if (an_format != "csv" && an_format != "json")
        throw tailstop::ConfigError("format: expected csv or json");
      return cmd_analyze(an_log, an_cfg, an_curve, an_format);
    }
    if (*cmp) {
      if (cmp_format != "csv" && cmp_format != "json")
        throw tailstop::ConfigError("format: expected csv or json");
      return cmd_compare(cmp_paths, cmp_out, cmp_format);
    }
    if (*rep) return cmd_report(rep_results, rep_out, rep_resamples);
  } catch (const tailstop::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
