// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "shaderflow/tensor.hpp"

namespace shaderflow {

class Rng;

// N depth maps, each [H x W].
using DepthPredictionSet = std::vector<Tensor>;
// N normal maps, each [H x W x 3] with unit vectors.
using NormalPredictionSet = std::vector<Tensor>;

struct AffineParams {
  std::vector<double> scale;
  std::vector<double> offset;

  static AffineParams identity(std::size_t n);
  std::size_t size() const { return scale.size(); }
};

// sqrt(sum_{i<j} ||d'_i - d'_j||^2 / C(N, 2)), d'_i = d_i * s_i + t_i, squared
// norm summed over pixels. 0 when N = 1.
double pairwise_term(const DepthPredictionSet& preds, const AffineParams& params);
// |min m| + |1 - max m| over the pixelwise median m.
double range_term(const DepthPredictionSet& preds, const AffineParams& params);
double depth_objective(const DepthPredictionSet& preds, const AffineParams& params, double lambda_reg);

struct AlignResult {
  AffineParams params;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> trace;  // best-so-far objective per iteration
};

AlignResult align_depth(const DepthPredictionSet& preds, double lambda_reg, std::size_t iters, Rng& rng);

// Pixelwise median of the aligned maps; even N averages the two middle values.
Tensor merge_depth(const DepthPredictionSet& preds, const AffineParams& params);

// Per pixel, the input vector with the largest cosine to the normalized mean.
// Ties go to the lowest index; a mean shorter than 1e-8 picks index 0.
Tensor ensemble_normals(const NormalPredictionSet& preds);

// R = I - A * l. l may have one channel, broadcast over the channels of A.
Tensor lighting_residual(const Tensor& image, const Tensor& albedo, const Tensor& shading);
Tensor reconstruct(const Tensor& albedo, const Tensor& shading, const Tensor& residual);

}  // namespace shaderflow
