// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/nelder_mead.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {
namespace {

void check_depth_set(const DepthPredictionSet& preds, const char* where) {
  if (preds.empty()) throw DimensionError(std::string(where) + ": empty prediction set");
  for (const Tensor& p : preds) {
    if (p.rank() != 2) throw DimensionError(std::string(where) + ": depth maps must be [H x W]");
    if (p.shape() != preds.front().shape())
      throw DimensionError(std::string(where) + ": maps " + shape_string(p.shape()) + " and " +
                           shape_string(preds.front().shape()) + " differ");
  }
}

void check_params(const DepthPredictionSet& preds, const AffineParams& params, const char* where) {
  if (params.scale.size() != preds.size() || params.offset.size() != preds.size())
    throw DimensionError(std::string(where) + ": " + std::to_string(params.scale.size()) + " affine pairs for " +
                         std::to_string(preds.size()) + " maps");
}

// Row i holds the aligned values of map i.
std::vector<std::vector<double>> aligned(const DepthPredictionSet& preds, const AffineParams& params) {
  std::vector<std::vector<double>> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto d = preds[i].data();
    out[i].resize(d.size());
    for (std::size_t p = 0; p < d.size(); ++p) out[i][p] = d[p] * params.scale[i] + params.offset[i];
  }
  return out;
}

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> pixel_median(const std::vector<std::vector<double>>& maps) {
  const std::size_t pixels = maps.front().size();
  std::vector<double> m(pixels), column(maps.size());
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t i = 0; i < maps.size(); ++i) column[i] = maps[i][p];
    m[p] = median_of(column);
  }
  return m;
}

double pairwise_of(const std::vector<std::vector<double>>& maps) {
  const std::size_t n = maps.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t p = 0; p < maps[i].size(); ++p) {
        const double diff = maps[i][p] - maps[j][p];
        total += diff * diff;
      }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  return std::sqrt(total / pairs);
}

double range_of(const std::vector<std::vector<double>>& maps) {
  const std::vector<double> m = pixel_median(maps);
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  return std::abs(*lo) + std::abs(1.0 - *hi);
}

}  // namespace

AffineParams AffineParams::identity(std::size_t n) { return {std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)}; }

double pairwise_term(const DepthPredictionSet& preds, const AffineParams& params) {
  check_depth_set(preds, "pairwise_term");
  check_params(preds, params, "pairwise_term");
  return pairwise_of(aligned(preds, params));
}

double range_term(const DepthPredictionSet& preds, const AffineParams& params) {
  check_depth_set(preds, "range_term");
  check_params(preds, params, "range_term");
  return range_of(aligned(preds, params));
}

double depth_objective(const DepthPredictionSet& preds, const AffineParams& params, double lambda_reg) {
  if (!(lambda_reg >= 0.0)) throw ConfigError("depth_objective: lambda_reg must be >= 0");
  check_depth_set(preds, "depth_objective");
  check_params(preds, params, "depth_objective");
  const auto maps = aligned(preds, params);
  return pairwise_of(maps) + lambda_reg * range_of(maps);
}

AlignResult align_depth(const DepthPredictionSet& preds, double lambda_reg, std::size_t iters, Rng& rng) {
  if (!(lambda_reg >= 0.0)) throw ConfigError("align_depth: lambda_reg must be >= 0");
  check_depth_set(preds, "align_depth");
  const std::size_t n = preds.size();
  auto unpack = [n](std::span<const double> x) {
    AffineParams p;
    p.scale.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    p.offset.assign(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
    return p;
  };
  const Objective f = [&](std::span<const double> x) { return depth_objective(preds, unpack(x), lambda_reg); };

  AlignResult out;
  out.params = AffineParams::identity(n);
  out.objective = depth_objective(preds, out.params, lambda_reg);
  out.initial_objective = out.objective;
  out.trace.push_back(out.objective);
  if (iters == 0) return out;

  // Phase 1: shape only. pairwise / range(median) ignores any common affine,
  // so the search cannot slide into the collapse s_i -> 0 that the raw
  // objective rewards early on. Rescaling a point so its median spans [0, 1]
  // zeroes the range term, and the true objective there equals the ratio.
  auto normalized = [&](std::span<const double> x) -> std::optional<AffineParams> {
    AffineParams p = unpack(x);
    const auto maps = aligned(preds, p);
    const std::vector<double> m = pixel_median(maps);
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    const double range = *hi - *lo;
    if (!(range > 1e-12)) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i) {
      p.scale[i] /= range;
      p.offset[i] = (p.offset[i] - *lo) / range;
    }
    return p;
  };
  const double flat_penalty = std::max(1.0, 10.0 * out.objective);
  const Objective ratio = [&](std::span<const double> x) {
    const auto p = normalized(x);
    return p ? pairwise_term(preds, *p) : flat_penalty;
  };
  std::vector<double> x0(n, 1.0);
  x0.resize(2 * n, 0.0);
  NelderMeadOptions shape_opts;
  shape_opts.max_iters = iters - iters / 4;
  std::size_t remaining = iters;
  if (shape_opts.max_iters > 0 && n > 1) {
    const NelderMeadResult shape = nelder_mead(ratio, x0, shape_opts, &rng);
    remaining -= shape.iterations;
    const auto p = normalized(shape.x);
    const double value = p ? depth_objective(preds, *p, lambda_reg) : out.objective;
    for (std::size_t i = 1; i < shape.trace.size(); ++i) out.trace.push_back(out.trace.back());
    if (p && value < out.objective) {
      out.objective = value;
      out.params = *p;
      out.trace.back() = value;
    }
  }

  // Phase 2: the raw objective. Near the aligned set it is a narrow cone
  // whose floor runs along the common-affine direction, where a plain simplex
  // crawls, so rounds of the full 2N search alternate with a 2-parameter
  // search over a common (g, h) applied to every map.
  constexpr std::size_t kFullRound = 120;
  constexpr std::size_t kGaugeRound = 40;
  auto absorb = [&](const NelderMeadResult& nm, const AffineParams& candidate) {
    for (std::size_t i = 1; i < nm.trace.size(); ++i) out.trace.push_back(std::min(out.trace.back(), nm.trace[i]));
    remaining -= nm.iterations;
    if (nm.value < out.objective) {
      out.objective = nm.value;
      out.params = candidate;
    }
  };
  NelderMeadOptions opts;
  while (remaining > 0 && out.objective > 0.0) {
    std::vector<double> x = out.params.scale;
    x.insert(x.end(), out.params.offset.begin(), out.params.offset.end());
    // The objective is within a constant factor of the distance to the
    // optimum, so it also sizes the next simplex.
    opts.initial_step = std::clamp(out.objective, 1e-12, 0.1);
    opts.max_iters = std::min(kFullRound, remaining);
    const NelderMeadResult full = nelder_mead(f, x, opts, &rng);
    absorb(full, unpack(full.x));
    if (remaining == 0 || out.objective == 0.0) break;

    const AffineParams start = out.params;
    auto gauge = [&start](std::span<const double> gh) {
      AffineParams p = start;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.scale[i] = gh[0] * start.scale[i];
        p.offset[i] = gh[0] * start.offset[i] + gh[1];
      }
      return p;
    };
    const Objective g = [&](std::span<const double> gh) { return depth_objective(preds, gauge(gh), lambda_reg); };
    opts.max_iters = std::min(kGaugeRound, remaining);
    const NelderMeadResult joint = nelder_mead(g, {1.0, 0.0}, opts, &rng);
    absorb(joint, gauge(joint.x));
  }
  return out;
}

Tensor merge_depth(const DepthPredictionSet& preds, const AffineParams& params) {
  check_depth_set(preds, "merge_depth");
  check_params(preds, params, "merge_depth");
  return Tensor(preds.front().shape(), pixel_median(aligned(preds, params)));
}

Tensor ensemble_normals(const NormalPredictionSet& preds) {
  if (preds.empty()) throw DimensionError("ensemble_normals: empty prediction set");
  const Shape& shape = preds.front().shape();
  if (shape.size() != 3 || shape[2] != 3) throw DimensionError("ensemble_normals: normal maps must be [H x W x 3]");
  for (const Tensor& p : preds)
    if (p.shape() != shape) throw DimensionError("ensemble_normals: prediction shapes differ");

  const std::size_t pixels = shape[0] * shape[1];
  std::vector<double> out(pixels * 3);
  for (std::size_t px = 0; px < pixels; ++px) {
    double mean[3] = {0.0, 0.0, 0.0};
    for (const Tensor& p : preds)
      for (std::size_t c = 0; c < 3; ++c) mean[c] += p.data()[px * 3 + c];
    for (double& m : mean) m /= static_cast<double>(preds.size());
    const double norm = std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]);
    std::size_t pick = 0;
    if (norm >= 1e-8) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < preds.size(); ++i) {
        const double* v = preds[i].data().data() + px * 3;
        const double cosine = (v[0] * mean[0] + v[1] * mean[1] + v[2] * mean[2]) / norm;
        if (cosine > best) {
          best = cosine;
          pick = i;
        }
      }
    }
    std::copy_n(preds[pick].data().data() + px * 3, 3, out.data() + px * 3);
  }
  return Tensor(shape, std::move(out));
}

namespace {

// Index into l for element e of an A-shaped map.
std::size_t shading_index(const Shape& a, const Shape& l, std::size_t e) {
  if (l == a) return e;
  return e / a.back();
}

void check_shading(const Tensor& albedo, const Tensor& shading, const char* where) {
  const Shape& a = albedo.shape();
  const Shape& l = shading.shape();
  if (l == a) return;
  // [H x W] or [H x W x 1] shading against [H x W x C] albedo.
  const bool flat = a.size() == 3 && ((l.size() == 2 && l[0] == a[0] && l[1] == a[1]) ||
                                      (l.size() == 3 && l[0] == a[0] && l[1] == a[1] && l[2] == 1));
  if (!flat)
    throw DimensionError(std::string(where) + ": shading " + shape_string(l) + " does not broadcast to albedo " +
                         shape_string(a));
}

}  // namespace

Tensor lighting_residual(const Tensor& image, const Tensor& albedo, const Tensor& shading) {
  if (image.shape() != albedo.shape())
    throw DimensionError("lighting_residual: image " + shape_string(image.shape()) + " and albedo " +
                         shape_string(albedo.shape()) + " differ");
  check_shading(albedo, shading, "lighting_residual");
  std::vector<double> r(image.numel());
  auto i = image.data(), a = albedo.data(), l = shading.data();
  for (std::size_t e = 0; e < r.size(); ++e) r[e] = i[e] - a[e] * l[shading_index(albedo.shape(), shading.shape(), e)];
  return Tensor(image.shape(), std::move(r));
}

Tensor reconstruct(const Tensor& albedo, const Tensor& shading, const Tensor& residual) {
  if (residual.shape() != albedo.shape())
    throw DimensionError("reconstruct: residual " + shape_string(residual.shape()) + " and albedo " +
                         shape_string(albedo.shape()) + " differ");
  check_shading(albedo, shading, "reconstruct");
  std::vector<double> out(albedo.numel());
  auto a = albedo.data(), l = shading.data(), r = residual.data();
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = a[e] * l[shading_index(albedo.shape(), shading.shape(), e)] + r[e];
  return Tensor(albedo.shape(), std::move(out));
}

}  // namespace shaderflow
