#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailstop/errors.hpp"
#include "tailstop/nelder_mead.hpp"

namespace tailstop {

/// Any fit below this many exceedances is refused; the prediction pipeline
/// falls back to the observed maximum instead.
inline constexpr std::size_t kMinExceedances = 10;

enum class TailKind { exponential, gpd, pp };

inline const char* to_string(TailKind k) {
  switch (k) {
    case TailKind::exponential: return "exponential";
    case TailKind::gpd: return "gpd";
    case TailKind::pp: return "pp";
  }
  return "?";
}

/// Fitted tail distribution. location is the point-process mu; for
/// gpd/exponential reporting it equals the threshold. zeta is the fraction of
/// observations strictly above the threshold. obs_per_period converts
/// iterations to return-period units.
struct TailModelParams {
  TailKind kind = TailKind::exponential;
  double location = 0.0;
  double scale = 1.0;
  double shape = 0.0;
  double threshold = 0.0;
  double zeta = 1.0;
  std::uint64_t obs_per_period = 365;
};

/// Extrapolation is sound for exponential (type I) and bounded (type III)
/// tails; a positive shape means a heavy tail with no usable guarantee.
inline bool shape_is_valid(const TailModelParams& p) { return p.shape <= 0.0; }

namespace detail {

inline constexpr double kShapeEps = 1e-10;

/// Negative GPD log-likelihood for excesses y > 0; +inf outside the support.
inline double gpd_nll(double sigma, double xi, std::span<const double> y) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  const double k = static_cast<double>(y.size());
  if (std::abs(xi) < kShapeEps) {
    double s = 0.0;
    for (double v : y) s += v;
    return k * std::log(sigma) + s / sigma;
  }
  double s = 0.0;
  for (double v : y) {
    const double z = 1.0 + xi * v / sigma;
    if (z <= 0.0) return std::numeric_limits<double>::infinity();
    s += std::log(z);
  }
  return k * std::log(sigma) + (1.0 + 1.0 / xi) * s;
}

/// Probability-weighted-moments estimate (Hosking & Wallis). Returns nothing
/// when the sample is degenerate or the estimate is infeasible for the
/// sample; callers treat that as a failed fit.
inline std::optional<std::pair<double, double>> gpd_pwm(
    std::span<const double> sorted_ascending) {
  const std::size_t n = sorted_ascending.size();
  if (n < 2) return std::nullopt;
  double a0 = 0.0;
  double a1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sorted_ascending[i];
    a0 += v;
    a1 += v * static_cast<double>(n - 1 - i) / static_cast<double>(n - 1);
  }
  a0 /= static_cast<double>(n);
  a1 /= static_cast<double>(n);
  const double denom = a0 - 2.0 * a1;
  if (!(denom > 0.0)) return std::nullopt;
  const double sigma = 2.0 * a0 * a1 / denom;
  const double xi = 2.0 - a0 / denom;
  if (!(sigma > 0.0) || !std::isfinite(xi)) return std::nullopt;
  if (xi < 0.0 && sorted_ascending.back() >= -sigma / xi) return std::nullopt;
  return std::make_pair(sigma, xi);
}

/// A PWM seed that is always feasible for the data (falls back to the
/// exponential MLE when the PWM estimate is unusable).
inline std::pair<double, double> gpd_seed(std::span<const double> y) {
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  if (auto pwm = gpd_pwm(sorted)) return *pwm;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  return {mean, 0.0};
}

}  // namespace detail

/// Exponential excess model: the maximum-likelihood scale is the mean excess.
inline TailModelParams fit_exponential(std::span<const double> excesses,
                                       double threshold, double zeta,
                                       std::uint64_t obs_per_period) {
  if (excesses.size() < 2)
    throw TooFewExceedancesError("exponential fit needs >= 2 excesses, got " +
                                 std::to_string(excesses.size()));
  double mean = 0.0;
  for (double v : excesses) {
    if (!(v > 0.0)) throw FitError("excesses must be strictly positive");
    mean += v;
  }
  mean /= static_cast<double>(excesses.size());
  TailModelParams p;
  p.kind = TailKind::exponential;
  p.location = threshold;
  p.scale = mean;
  p.shape = 0.0;
  p.threshold = threshold;
  p.zeta = zeta;
  p.obs_per_period = obs_per_period;
  return p;
}

struct FitOptions {
  double x_tol = 1e-8;
  std::size_t max_evals = 10000;
  std::size_t min_exceedances = kMinExceedances;
};

/// Maximum-likelihood GPD fit of threshold excesses via a two-dimensional
/// simplex search seeded from probability-weighted moments. The support
/// constraint 1 + xi*y/sigma > 0 is enforced by rejection.
inline TailModelParams fit_gpd(std::span<const double> excesses,
                               double threshold, double zeta,
                               std::uint64_t obs_per_period,
                               const FitOptions& opt = {}) {
  if (excesses.size() < opt.min_exceedances)
    throw TooFewExceedancesError("gpd fit needs >= " +
                                 std::to_string(opt.min_exceedances) +
                                 " excesses, got " +
                                 std::to_string(excesses.size()));
  for (double v : excesses)
    if (!(v > 0.0)) throw FitError("excesses must be strictly positive");

  const auto [sigma0, xi0] = detail::gpd_seed(excesses);
  auto nll = [&](std::span<const double> x) {
    return detail::gpd_nll(x[0], x[1], excesses);
  };
  NelderMeadOptions nm;
  nm.x_tol = opt.x_tol;
  nm.max_evals = opt.max_evals;
  const auto res = nelder_mead(nll, {sigma0, xi0}, {0.2 * sigma0, 0.1}, nm);
  if (!std::isfinite(res.value))
    throw FitError("gpd likelihood is infeasible for the data");
  if (!res.converged)
    throw FitError("gpd optimizer did not converge within " +
                   std::to_string(opt.max_evals) + " evaluations");

  TailModelParams p;
  p.kind = TailKind::gpd;
  p.location = threshold;
  p.scale = res.x[0];
  p.shape = std::abs(res.x[1]) < detail::kShapeEps ? 0.0 : res.x[1];
  p.threshold = threshold;
  p.zeta = zeta;
  p.obs_per_period = obs_per_period;
  return p;
}

namespace detail {

/// Negative log-likelihood of the peaks-over-threshold point process in GEV
/// parameterization: span_t periods of observation, exceedances x_i > u.
inline double pp_nll(double mu, double sigma, double xi, double u,
                     double span_t, std::span<const double> exceedances) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  double nll = 0.0;
  if (std::abs(xi) < kShapeEps) {
    nll = span_t * std::exp(-(u - mu) / sigma);
    for (double x : exceedances)
      nll += std::log(sigma) + (x - mu) / sigma;
    return nll;
  }
  const double zu = 1.0 + xi * (u - mu) / sigma;
  // threshold above the support cap means zero expected exceedances
  nll = zu > 0.0 ? span_t * std::pow(zu, -1.0 / xi)
                 : (xi < 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  if (!std::isfinite(nll)) return nll;
  for (double x : exceedances) {
    const double z = 1.0 + xi * (x - mu) / sigma;
    if (z <= 0.0) return std::numeric_limits<double>::infinity();
    nll += std::log(sigma) + (1.0 + 1.0 / xi) * std::log(z);
  }
  return nll;
}

/// Convert a GPD excess fit into equivalent point-process parameters given
/// the expected exceedance count per span_t periods.
inline std::array<double, 3> pp_seed_from_gpd(double u, double sigma_gpd,
                                              double xi, double count,
                                              double span_t) {
  const double rate = count / span_t;  // exceedances per period
  if (std::abs(xi) < kShapeEps)
    return {u + sigma_gpd * std::log(rate), sigma_gpd, 0.0};
  // from 1 + xi(u-mu)/sigma = rate^-xi and sigma_gpd = sigma + xi(u-mu)
  const double s = std::pow(rate, -xi);
  const double sigma = sigma_gpd / s;
  return {u - sigma / xi * (s - 1.0), sigma, xi};
}

}  // namespace detail

/// Point-process (GEV-parameterized) fit of everything strictly above the
/// threshold. The observation span is total samples / obs_per_period.
inline TailModelParams fit_pp(std::span<const double> deltas, double threshold,
                              double zeta, std::uint64_t obs_per_period,
                              const FitOptions& opt = {}) {
  std::vector<double> exceedances;
  for (double d : deltas)
    if (d > threshold) exceedances.push_back(d);
  if (exceedances.size() < opt.min_exceedances)
    throw TooFewExceedancesError("pp fit needs >= " +
                                 std::to_string(opt.min_exceedances) +
                                 " exceedances, got " +
                                 std::to_string(exceedances.size()));
  const double span_t =
      static_cast<double>(deltas.size()) / static_cast<double>(obs_per_period);

  std::vector<double> excesses;
  excesses.reserve(exceedances.size());
  for (double x : exceedances) excesses.push_back(x - threshold);
  const auto [sg, xg] = detail::gpd_seed(excesses);
  const auto seed = detail::pp_seed_from_gpd(
      threshold, sg, xg, static_cast<double>(exceedances.size()), span_t);

  auto nll = [&](std::span<const double> x) {
    return detail::pp_nll(x[0], x[1], x[2], threshold, span_t, exceedances);
  };
  NelderMeadOptions nm;
  nm.x_tol = opt.x_tol;
  nm.max_evals = opt.max_evals;
  const auto res = nelder_mead(nll, {seed[0], seed[1], seed[2]},
                               {0.2 * seed[1], 0.2 * seed[1], 0.1}, nm);
  if (!std::isfinite(res.value))
    throw FitError("pp likelihood is infeasible for the data");
  if (!res.converged)
    throw FitError("pp optimizer did not converge within " +
                   std::to_string(opt.max_evals) + " evaluations");

  TailModelParams p;
  p.kind = TailKind::pp;
  p.location = res.x[0];
  p.scale = res.x[1];
  p.shape = std::abs(res.x[2]) < detail::kShapeEps ? 0.0 : res.x[2];
  p.threshold = threshold;
  p.zeta = zeta;
  p.obs_per_period = obs_per_period;
  return p;
}

/// Level expected to be exceeded once over the given horizon (in iterations).
/// For gpd/exponential a horizon with horizon*zeta <= 1 sits at or below the
/// threshold and the threshold itself is returned.
inline double return_level(const TailModelParams& p, std::uint64_t horizon) {
  if (horizon == 0) throw ConfigError("horizon must be >= 1");
  switch (p.kind) {
    case TailKind::exponential: {
      const double hz = static_cast<double>(horizon) * p.zeta;
      if (hz <= 1.0) return p.threshold;
      return p.threshold + p.scale * std::log(hz);
    }
    case TailKind::gpd: {
      const double hz = static_cast<double>(horizon) * p.zeta;
      if (hz <= 1.0) return p.threshold;
      if (p.shape == 0.0) return p.threshold + p.scale * std::log(hz);
      return p.threshold +
             p.scale / p.shape * (std::pow(hz, p.shape) - 1.0);
    }
    case TailKind::pp: {
      const double m = static_cast<double>(horizon) /
                       static_cast<double>(p.obs_per_period);
      if (m <= 1.0)
        throw ConfigError(
            "pp return level needs horizon > obs_per_period (m > 1)");
      const double y = -std::log(1.0 - 1.0 / m);
      if (p.shape == 0.0) return p.location - p.scale * std::log(y);
      return p.location -
             p.scale / p.shape * (1.0 - std::pow(y, -p.shape));
    }
  }
  throw ConfigError("unknown tail kind");
}

}  // namespace tailstop
