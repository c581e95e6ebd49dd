#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailstop/errors.hpp"

namespace tailstop {

/// One fuzzing iteration: the two execution costs and their absolute
/// difference. Costs are abstract nonnegative integer units (e.g. instruction
/// counts); real-valued costs are rejected at ingest.
struct DiffSample {
  std::uint64_t index = 0;
  std::uint64_t cost_a = 0;
  std::uint64_t cost_b = 0;
  std::uint64_t delta = 0;  // always |cost_a - cost_b|
  std::string input_id;     // optional provenance of the (x, z1, z2) triple

  static DiffSample make(std::uint64_t index, std::uint64_t cost_a,
                         std::uint64_t cost_b, std::string input_id = {}) {
    DiffSample s;
    s.index = index;
    s.cost_a = cost_a;
    s.cost_b = cost_b;
    s.delta = cost_a > cost_b ? cost_a - cost_b : cost_b - cost_a;
    s.input_id = std::move(input_id);
    return s;
  }

  bool operator==(const DiffSample&) const = default;
};

/// An ordered cost-difference stream plus free-form metadata
/// (target name, seed, budget, ...).
struct CampaignLog {
  std::vector<DiffSample> samples;
  std::map<std::string, std::string> meta;

  std::vector<std::uint64_t> deltas() const {
    std::vector<std::uint64_t> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.delta);
    return out;
  }

  bool operator==(const CampaignLog&) const = default;
};

struct SummaryStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::uint64_t max = 0;
  std::uint64_t min = 0;
};

struct SplitLog {
  CampaignLog training;
  CampaignLog testing;
  std::uint64_t split_index = 0;
};

enum class LogFormat { csv, jsonl };

inline SummaryStats summarize(std::span<const std::uint64_t> deltas) {
  if (deltas.empty()) throw EmptyLogError("summarize: empty log");
  SummaryStats st;
  st.count = deltas.size();
  st.min = deltas.front();
  st.max = deltas.front();
  // Welford's recurrence; the m2 accumulator divided by n is the population
  // variance
  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t n = 0;
  for (std::uint64_t d : deltas) {
    st.min = std::min(st.min, d);
    st.max = std::max(st.max, d);
    ++n;
    const double x = static_cast<double>(d);
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  st.mean = mean;
  st.std = std::sqrt(m2 / static_cast<double>(n));
  return st;
}

inline SummaryStats summarize(const CampaignLog& log) {
  const auto d = log.deltas();
  return summarize(std::span<const std::uint64_t>(d));
}

inline SplitLog split(const CampaignLog& log, std::uint64_t at) {
  if (at > log.samples.size())
    throw ConfigError("split index " + std::to_string(at) +
                      " out of range for log of size " +
                      std::to_string(log.samples.size()));
  SplitLog out;
  out.split_index = at;
  out.training.meta = log.meta;
  out.testing.meta = log.meta;
  out.training.samples.assign(log.samples.begin(),
                              log.samples.begin() + static_cast<long>(at));
  out.testing.samples.assign(log.samples.begin() + static_cast<long>(at),
                             log.samples.end());
  return out;
}

/// The k largest deltas in descending order. Conceptually the selection is
/// stable and prefers later indices on ties at the cut; since only values are
/// returned the choice is unobservable, but it is the documented, fixed rule.
inline std::vector<std::uint64_t> top_k(std::span<const std::uint64_t> deltas,
                                        std::size_t k) {
  if (k == 0 || k > deltas.size())
    throw ConfigError("top_k: k=" + std::to_string(k) +
                      " out of range for sequence of size " +
                      std::to_string(deltas.size()));
  std::vector<std::uint64_t> v(deltas.begin(), deltas.end());
  std::partial_sort(v.begin(), v.begin() + static_cast<long>(k), v.end(),
                    std::greater<>());
  v.resize(k);
  return v;
}

// ---------------------------------------------------------------------------
// File ingestion and emission.
//
// CSV schema: header `index,cost_a,cost_b,delta,input_id`, where delta and
// input_id are optional columns. Lines starting with `#meta key=value` carry
// log metadata. JSONL: one object per line with the same keys; a line shaped
// `{"meta": {...}}` carries metadata. UTF-8, LF line endings.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t parse_u64_field(std::string_view field, std::size_t line,
                                     const char* what) {
  std::uint64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(std::string(what) + " is not a nonnegative integer: '" +
                         std::string(field) + "'",
                     line);
  return value;
}

// RFC 4180 style: fields containing comma, quote or newline are quoted,
// quotes are doubled.
inline std::vector<std::string> split_csv_row(std::string_view row,
                                              std::size_t line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char c = row[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < row.size() && row[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void check_sample_order(const CampaignLog& log, std::uint64_t index,
                               std::size_t line) {
  if (!log.samples.empty() && index <= log.samples.back().index)
    throw ParseError("sample indices must be strictly increasing (" +
                         std::to_string(index) + " after " +
                         std::to_string(log.samples.back().index) + ")",
                     line);
}

}  // namespace detail

inline CampaignLog parse_csv(std::istream& in) {
  CampaignLog log;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> col_index, col_a, col_b, col_delta, col_id;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with("#meta ")) {
      const std::string_view kv = std::string_view(line).substr(6);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("malformed #meta line", lineno);
      log.meta[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
      continue;
    }
    if (line.starts_with("#")) continue;
    auto fields = detail::split_csv_row(line, lineno);
    if (!header_seen) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& name = fields[i];
        if (name == "index") col_index = i;
        else if (name == "cost_a") col_a = i;
        else if (name == "cost_b") col_b = i;
        else if (name == "delta") col_delta = i;
        else if (name == "input_id") col_id = i;
        else throw ParseError("unknown column '" + name + "'", lineno);
      }
      if (!col_index || !col_a || !col_b)
        throw ParseError("header must contain index,cost_a,cost_b", lineno);
      header_seen = true;
      continue;
    }
    if (fields.size() <= std::max({*col_index, *col_a, *col_b}))
      throw ParseError("row has too few fields", lineno);
    const auto index =
        detail::parse_u64_field(fields[*col_index], lineno, "index");
    const auto cost_a = detail::parse_u64_field(fields[*col_a], lineno, "cost_a");
    const auto cost_b = detail::parse_u64_field(fields[*col_b], lineno, "cost_b");
    detail::check_sample_order(log, index, lineno);
    std::string input_id;
    if (col_id && *col_id < fields.size()) input_id = fields[*col_id];
    auto sample = DiffSample::make(index, cost_a, cost_b, std::move(input_id));
    if (col_delta && *col_delta < fields.size() &&
        !fields[*col_delta].empty()) {
      const auto claimed =
          detail::parse_u64_field(fields[*col_delta], lineno, "delta");
      if (claimed != sample.delta)
        throw DeltaMismatchError(
            "delta column says " + std::to_string(claimed) + " but |" +
                std::to_string(cost_a) + " - " + std::to_string(cost_b) +
                "| = " + std::to_string(sample.delta),
            lineno);
    }
    log.samples.push_back(std::move(sample));
  }
  if (!header_seen) throw EmptyLogError("empty file");
  if (log.samples.empty()) throw EmptyLogError("file has a header but no rows");
  return log;
}

inline CampaignLog parse_jsonl(std::istream& in) {
  CampaignLog log;
  std::string line;
  std::size_t lineno = 0;
  bool any_line = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    any_line = true;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
    if (j.contains("meta")) {
      for (const auto& [k, v] : j.at("meta").items())
        log.meta[k] = v.get<std::string>();
      continue;
    }
    auto require_u64 = [&](const char* key) -> std::uint64_t {
      if (!j.contains(key))
        throw ParseError(std::string("missing key '") + key + "'", lineno);
      const auto& v = j.at(key);
      if (!v.is_number_unsigned())
        throw ParseError(std::string(key) + " is not a nonnegative integer",
                         lineno);
      return v.get<std::uint64_t>();
    };
    const auto index = require_u64("index");
    const auto cost_a = require_u64("cost_a");
    const auto cost_b = require_u64("cost_b");
    detail::check_sample_order(log, index, lineno);
    std::string input_id;
    if (j.contains("input_id")) input_id = j.at("input_id").get<std::string>();
    auto sample = DiffSample::make(index, cost_a, cost_b, std::move(input_id));
    if (j.contains("delta")) {
      const auto claimed = require_u64("delta");
      if (claimed != sample.delta)
        throw DeltaMismatchError("delta key says " + std::to_string(claimed) +
                                     " but costs differ by " +
                                     std::to_string(sample.delta),
                                 lineno);
    }
    log.samples.push_back(std::move(sample));
  }
  if (!any_line) throw EmptyLogError("empty file");
  if (log.samples.empty()) throw EmptyLogError("file has no sample lines");
  return log;
}

inline void write_csv(const CampaignLog& log, std::ostream& out) {
  for (const auto& [k, v] : log.meta) out << "#meta " << k << "=" << v << "\n";
  out << "index,cost_a,cost_b,delta,input_id\n";
  for (const auto& s : log.samples)
    out << s.index << ',' << s.cost_a << ',' << s.cost_b << ',' << s.delta
        << ',' << detail::csv_escape(s.input_id) << "\n";
}

inline void write_jsonl(const CampaignLog& log, std::ostream& out) {
  if (!log.meta.empty()) {
    nlohmann::json m;
    for (const auto& [k, v] : log.meta) m[k] = v;
    out << nlohmann::json{{"meta", m}}.dump() << "\n";
  }
  for (const auto& s : log.samples) {
    nlohmann::json j{{"index", s.index},
                     {"cost_a", s.cost_a},
                     {"cost_b", s.cost_b},
                     {"delta", s.delta},
                     {"input_id", s.input_id}};
    out << j.dump() << "\n";
  }
}

inline CampaignLog ingest(const std::filesystem::path& path, LogFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return format == LogFormat::csv ? parse_csv(in) : parse_jsonl(in);
}

inline void emit(const CampaignLog& log, const std::filesystem::path& path,
                 LogFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (format == LogFormat::csv) write_csv(log, out);
  else write_jsonl(log, out);
}

}  // namespace tailstop
