// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {
namespace {

struct Vertex {
  std::vector<double> x;
  double f;
};

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& options,
                             Rng* rng) {
  if (x0.empty()) throw ConfigError("nelder_mead: empty parameter vector");
  if (!(options.initial_step > 0.0)) throw ConfigError("nelder_mead: initial_step must be positive");
  const std::size_t n = x0.size();
  NelderMeadResult result;
  // Dimension-adapted coefficients; they reduce to 1, 2, 1/2, 1/2 at n = 2.
  const double dn = static_cast<double>(n);
  const double kReflect = 1.0;
  const double kExpand = 1.0 + 2.0 / dn;
  const double kContract = std::max(0.5, 0.75 - 0.5 / dn);
  const double kShrink = std::max(0.5, 1.0 - 1.0 / dn);

  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    ++result.evaluations;
    if (!std::isfinite(v))
      throw NumericError("nelder_mead: non-finite objective at evaluation " + std::to_string(result.evaluations));
    return v;
  };

  std::vector<Vertex> simplex;
  // Edges along the coordinate axes, or along a random orthonormal basis when
  // restarting with an rng (lets the simplex follow diagonal valleys).
  auto build_simplex = [&](const std::vector<double>& center, double center_f, double step, bool rotate) {
    std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;
    if (rotate && rng) {
      for (std::size_t i = 0; i < n; ++i) {
        for (double& v : dirs[i]) v = rng->normal();
        for (std::size_t j = 0; j < i; ++j) {
          const double proj = std::inner_product(dirs[i].begin(), dirs[i].end(), dirs[j].begin(), 0.0);
          for (std::size_t k = 0; k < n; ++k) dirs[i][k] -= proj * dirs[j][k];
        }
        const double norm = std::sqrt(std::inner_product(dirs[i].begin(), dirs[i].end(), dirs[i].begin(), 0.0));
        for (double& v : dirs[i]) v /= norm;
      }
    }
    simplex.clear();
    simplex.push_back({center, center_f});
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> x = center;
      for (std::size_t k = 0; k < n; ++k) x[k] += step * dirs[i][k];
      simplex.push_back({x, eval(x)});
    }
  };

  Vertex best{x0, eval(x0)};
  result.trace.push_back(best.f);
  build_simplex(x0, best.f, options.initial_step, false);

  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  double checkpoint = best.f;
  std::size_t since_checkpoint = 0;

  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    const double spread = simplex.back().f - simplex.front().f;
    const bool collapsed = spread <= options.restart_spread * std::max(1.0, std::abs(simplex.front().f));
    const bool stalled = since_checkpoint >= options.stall_iters;
    if (best.f > 0.0 && (collapsed || stalled)) {
      double diameter = 0.0;
      for (std::size_t v = 1; v <= n; ++v) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) d2 += (simplex[v].x[i] - best.x[i]) * (simplex[v].x[i] - best.x[i]);
        diameter = std::max(diameter, std::sqrt(d2));
      }
      build_simplex(best.x, best.f, std::clamp(10.0 * diameter, 1e-9, options.initial_step), true);
      ++result.restarts;
      std::stable_sort(simplex.begin(), simplex.end(), by_value);
      checkpoint = best.f;
      since_checkpoint = 0;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i];
    for (double& c : centroid) c /= static_cast<double>(n);

    Vertex& worst = simplex.back();
    for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + kReflect * (centroid[i] - worst.x[i]);
    const double fr = eval(xr);
    if (fr < simplex.front().f) {
      for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + kExpand * (xr[i] - centroid[i]);
      const double fe = eval(xe);
      worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < simplex[n - 1].f) {
      worst = {xr, fr};
    } else {
      const bool outside = fr < worst.f;
      for (std::size_t i = 0; i < n; ++i)
        xc[i] = outside ? centroid[i] + kContract * (xr[i] - centroid[i])
                        : centroid[i] + kContract * (worst.x[i] - centroid[i]);
      const double fc = eval(xc);
      if (fc < (outside ? fr : worst.f)) {
        worst = {xc, fc};
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          for (std::size_t i = 0; i < n; ++i)
            simplex[v].x[i] = simplex[0].x[i] + kShrink * (simplex[v].x[i] - simplex[0].x[i]);
          simplex[v].f = eval(simplex[v].x);
        }
      }
    }

    for (const Vertex& v : simplex)
      if (v.f < best.f) best = v;
    result.trace.push_back(best.f);
    result.iterations = iter + 1;
    if (best.f < checkpoint * (1.0 - 1e-3)) {
      checkpoint = best.f;
      since_checkpoint = 0;
    } else {
      ++since_checkpoint;
    }
  }
  result.x = best.x;
  result.value = best.f;
  return result;
}

}  // namespace shaderflow
