// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "shaderflow/tensor.hpp"

namespace shaderflow {

class Rng;

inline constexpr std::size_t kDefaultSamplingSteps = 25;

struct FlowConfig {
  std::size_t num_steps = kDefaultSamplingSteps;
  std::uint64_t seed = 0;
};

struct FlowSample {
  Tensor x0;
  Tensor eps;
  double t = 0.0;
  Tensor xt;
};

// Velocity field v(x_t, t); conditions are captured by the callable.
using VelocityModel = std::function<Tensor(const Tensor& xt, double t)>;

// (1 - t) x0 + t eps, t in [0, 1].
Tensor flow_path(const Tensor& x0, const Tensor& eps, double t);

// t ~ U(0, 1), eps ~ N(0, I).
FlowSample draw_flow_sample(const Tensor& x0, Rng& rng);

// Squared error norm ||v(x_t, t) - (eps - x0)||^2 of one sample, summed over
// elements. Averaged over samples this is the flow-matching expectation; with
// batch size 1 there is nothing further to average.
Tensor cfm_loss_at(const VelocityModel& model, const FlowSample& sample);
Tensor cfm_loss(const VelocityModel& model, const Tensor& x0, Rng& rng);

// Euler steps from t = 1 down to t = 0 with dt = 1 / steps:
// x <- x - dt * v(x, t_k), t_k = 1 - k dt.
Tensor integrate_euler(const VelocityModel& model, const Tensor& x_init, std::size_t steps);

// integrate_euler from x ~ N(0, I) drawn with Rng(cfg.seed).
Tensor sample_euler(const VelocityModel& model, const Shape& shape, const FlowConfig& cfg);
Tensor initial_noise(const Shape& shape, std::uint64_t seed);

}  // namespace shaderflow
