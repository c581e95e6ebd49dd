#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace tailstop {

struct NelderMeadOptions {
  double x_tol = 1e-8;          // per-coordinate simplex extent
  std::size_t max_evals = 10000;
  std::size_t polish_restarts = 3;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  bool converged = false;
};

/// Derivative-free simplex minimizer. Infeasible points are rejected by
/// returning +inf from the objective. After the simplex collapses below
/// x_tol in every coordinate the search restarts from the best vertex with a
/// tightened simplex, which pushes the final point close enough to the
/// stationary point for finite-difference gradient checks.
inline NelderMeadResult nelder_mead(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> start, std::vector<double> step,
    const NelderMeadOptions& opt = {}) {
  const std::size_t dim = start.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  NelderMeadResult out;
  out.x = start;

  std::vector<std::vector<double>> pts;
  std::vector<double> vals;
  std::size_t evals = 0;

  auto eval = [&](std::span<const double> x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  auto build_simplex = [&](const std::vector<double>& origin,
                           const std::vector<double>& sizes) {
    pts.assign(1, origin);
    vals.assign(1, eval(origin));
    for (std::size_t i = 0; i < dim; ++i) {
      auto p = origin;
      p[i] += sizes[i] != 0.0 ? sizes[i] : 1e-4;
      pts.push_back(p);
      vals.push_back(eval(p));
    }
  };

  auto order = [&] {
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> v2;
    for (auto i : idx) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts.swap(p2);
    vals.swap(v2);
  };

  auto extent_below_tol = [&] {
    for (std::size_t c = 0; c < dim; ++c) {
      double lo = pts[0][c], hi = pts[0][c];
      for (const auto& p : pts) {
        lo = std::min(lo, p[c]);
        hi = std::max(hi, p[c]);
      }
      if (hi - lo >= opt.x_tol) return false;
    }
    return true;
  };

  std::vector<double> sizes = step;
  std::vector<double> origin = start;
  for (std::size_t round = 0; round <= opt.polish_restarts; ++round) {
    build_simplex(origin, sizes);
    order();
    while (evals < opt.max_evals) {
      if (extent_below_tol()) {
        out.converged = true;
        break;
      }
      // centroid of all but the worst vertex
      std::vector<double> centroid(dim, 0.0);
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        for (std::size_t c = 0; c < dim; ++c) centroid[c] += pts[i][c];
      for (auto& c : centroid) c /= static_cast<double>(dim);

      auto mix = [&](double t) {
        std::vector<double> p(dim);
        for (std::size_t c = 0; c < dim; ++c)
          p[c] = centroid[c] + t * (pts.back()[c] - centroid[c]);
        return p;
      };

      const auto reflected = mix(-alpha);
      const double fr = eval(reflected);
      if (fr < vals.front()) {
        const auto expanded = mix(-alpha * gamma);
        const double fe = eval(expanded);
        if (fe < fr) {
          pts.back() = expanded;
          vals.back() = fe;
        } else {
          pts.back() = reflected;
          vals.back() = fr;
        }
      } else if (fr < vals[vals.size() - 2]) {
        pts.back() = reflected;
        vals.back() = fr;
      } else {
        const bool outside = fr < vals.back();
        const auto contracted = mix(outside ? -rho : rho);
        const double fc = eval(contracted);
        if (fc < std::min(fr, vals.back())) {
          pts.back() = contracted;
          vals.back() = fc;
        } else {
          // shrink toward the best vertex
          for (std::size_t i = 1; i < pts.size(); ++i) {
            for (std::size_t c = 0; c < dim; ++c)
              pts[i][c] = pts[0][c] + sigma * (pts[i][c] - pts[0][c]);
            vals[i] = eval(pts[i]);
          }
        }
      }
      order();
    }
    if (vals.front() < out.value) {
      out.value = vals.front();
      out.x = pts.front();
    }
    if (evals >= opt.max_evals) break;
    origin = out.x;
    for (auto& s : sizes) s = std::max(std::abs(s) * 1e-3, 16 * opt.x_tol);
  }
  out.evals = evals;
  return out;
}

}  // namespace tailstop
