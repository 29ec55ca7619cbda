// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/flow.hpp"

#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {

Tensor flow_path(const Tensor& x0, const Tensor& eps, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("flow_path: t = " + std::to_string(t) + " outside [0, 1]");
  if (x0.shape() != eps.shape())
    throw DimensionError("flow_path: x0 " + shape_string(x0.shape()) + " vs eps " + shape_string(eps.shape()));
  // Endpoints are returned as-is so they hold bit-exactly.
  if (t == 0.0) return x0;
  if (t == 1.0) return eps;
  return add(scale(x0, 1.0 - t), scale(eps, t));
}

FlowSample draw_flow_sample(const Tensor& x0, Rng& rng) {
  FlowSample s;
  s.x0 = x0;
  s.t = rng.uniform();
  s.eps = Tensor::randn(x0.shape(), rng);
  s.xt = flow_path(s.x0, s.eps, s.t);
  return s;
}

Tensor cfm_loss_at(const VelocityModel& model, const FlowSample& sample) {
  Tensor prediction = model(sample.xt, sample.t);
  Tensor target = sub(sample.eps, sample.x0);
  if (prediction.shape() != target.shape())
    throw DimensionError("cfm_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  return sum(square(sub(prediction, target)));
}

Tensor cfm_loss(const VelocityModel& model, const Tensor& x0, Rng& rng) {
  return cfm_loss_at(model, draw_flow_sample(x0, rng));
}

Tensor integrate_euler(const VelocityModel& model, const Tensor& x_init, std::size_t steps) {
  if (steps < 1) throw ConfigError("sampler needs at least one step");
  const double dt = 1.0 / static_cast<double>(steps);
  Tensor x = x_init;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = 1.0 - static_cast<double>(k) * dt;
    try {
      Tensor v = model(x, t);
      if (v.shape() != x.shape())
        throw DimensionError("velocity " + shape_string(v.shape()) + " vs state " + shape_string(x.shape()));
      x = sub(x, scale(v, dt));
    } catch (const NumericError& e) {
      throw NumericError("sampler aborted at step " + std::to_string(k) + ": " + e.what());
    }
  }
  return x;
}

Tensor initial_noise(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(shape, rng);
}

Tensor sample_euler(const VelocityModel& model, const Shape& shape, const FlowConfig& cfg) {
  return integrate_euler(model, initial_noise(shape, cfg.seed), cfg.num_steps);
}

}  // namespace shaderflow
