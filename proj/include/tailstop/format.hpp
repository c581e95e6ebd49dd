#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace tailstop {

/// Signed percentage error of a prediction against the ground truth:
/// 100 * (predicted - ground_truth) / ground_truth. Positive means
/// overestimation.
inline double error_pct(double predicted, double ground_truth) {
  return 100.0 * (predicted - ground_truth) / ground_truth;
}

/// Fixed-point rendering for human tables (errors use one decimal).
inline std::string format_fixed(double v, int decimals = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// "73.3 [47.7, 98.9]" style rendering of a point estimate with its CI.
inline std::string format_interval(double value, double lo, double hi) {
  return format_fixed(value) + " [" + format_fixed(lo) + ", " +
         format_fixed(hi) + "]";
}

/// "u=32 (13/3226 exceedances)" style rendering of a threshold choice.
inline std::string format_threshold(double u, std::size_t exceedances,
                                    std::size_t total) {
  std::string us = format_fixed(u, u == static_cast<long long>(u) ? 0 : 2);
  return "u=" + us + " (" + std::to_string(exceedances) + "/" +
         std::to_string(total) + " exceedances)";
}

/// Shortest round-trip decimal for machine-readable CSV columns.
inline std::string format_shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace tailstop
