// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/flow.hpp"
#include "shaderflow/gradcheck.hpp"
#include "shaderflow/random.hpp"

using namespace shaderflow;

TEST_CASE("flow_path endpoints and midpoint") {
  Rng rng(1);
  const Tensor x0 = Tensor::randn({3, 4}, rng), eps = Tensor::randn({3, 4}, rng);
  CHECK(oracle::bitwise_equal(flow_path(x0, eps, 0.0), x0));
  CHECK(oracle::bitwise_equal(flow_path(x0, eps, 1.0), eps));
  CHECK(flow_path(Tensor::scalar(2.0), Tensor::scalar(0.0), 0.5).item() == 1.0);
  const Tensor mid = flow_path(x0, eps, 0.25);
  for (std::size_t i = 0; i < x0.numel(); ++i) CHECK(mid[i] == 0.75 * x0[i] + 0.25 * eps[i]);
  CHECK_THROWS_AS(flow_path(x0, eps, 1.5), ConfigError);
  CHECK_THROWS_AS(flow_path(x0, eps, -0.1), ConfigError);
  CHECK_THROWS_AS(flow_path(x0, Tensor::zeros({2}), 0.5), DimensionError);
}

TEST_CASE("drawn samples satisfy the path definition") {
  Rng rng(2);
  const Tensor x0 = Tensor::randn({2, 3}, rng);
  for (int i = 0; i < 10; ++i) {
    const FlowSample s = draw_flow_sample(x0, rng);
    CHECK(s.t >= 0.0);
    CHECK(s.t < 1.0);
    CHECK(oracle::bitwise_equal(s.xt, flow_path(s.x0, s.eps, s.t)));
  }
}

TEST_CASE("cfm loss: perfect, offset and positivity") {
  Rng rng(3);
  const Tensor x0 = Tensor::randn({4, 3}, rng);
  const FlowSample s = draw_flow_sample(x0, rng);
  const Tensor target = sub(s.eps, s.x0);
  const VelocityModel perfect = [&](const Tensor&, double) { return target; };
  CHECK(cfm_loss_at(perfect, s).item() == 0.0);

  // Loss is the squared error norm summed over the sample; per element it is c^2.
  const double c = 0.3;
  const VelocityModel offset = [&](const Tensor&, double) { return add_scalar(target, c); };
  const double loss = cfm_loss_at(offset, s).item();
  CHECK(std::abs(loss / static_cast<double>(x0.numel()) - c * c) < 1e-15);

  const VelocityModel wrong = [&](const Tensor& x, double) { return x; };
  CHECK(cfm_loss_at(wrong, s).item() > 0.0);

  const VelocityModel bad_shape = [](const Tensor&, double) { return Tensor::zeros({1}); };
  CHECK_THROWS_AS(cfm_loss_at(bad_shape, s), DimensionError);
}

TEST_CASE("cfm loss gradient of a one-parameter model matches finite differences") {
  Rng rng(4);
  const Tensor x0 = Tensor::randn({3, 2}, rng);
  const FlowSample s = draw_flow_sample(x0, rng);
  const Tensor theta({1}, {0.4}, true);
  auto loss_for = [&](const Tensor& w) {
    const VelocityModel m = [&](const Tensor& x, double t) {
      return scale(reshape(matmul(reshape(x, {6, 1}), reshape(w, {1, 1})), {3, 2}), t);
    };
    return cfm_loss_at(m, s);
  };
  loss_for(theta).backward();
  const Tensor fd = finite_diff_grad([&](const Tensor& w) { return loss_for(w).item(); }, theta.detach(), 1e-5);
  CHECK(std::abs(theta.grad()[0] - fd[0]) / std::abs(fd[0]) < 1e-4);
}

TEST_CASE("euler recovers x0 exactly along a constant field") {
  Rng rng(5);
  const Tensor x0 = Tensor::randn({4, 3}, rng);
  const Tensor eps = initial_noise({4, 3}, 77);
  const VelocityModel oracle_v = [&](const Tensor&, double) { return sub(eps, x0); };
  CHECK(oracle::max_abs_diff(integrate_euler(oracle_v, eps, 1).data(), x0.data()) < 1e-12);
  for (std::size_t steps : {1u, 5u, 25u}) {
    const Tensor out = sample_euler(oracle_v, {4, 3}, FlowConfig{steps, 77});
    CHECK(oracle::max_abs_diff(out.data(), x0.data()) < 1e-10);
  }
}

TEST_CASE("sampler basics") {
  const VelocityModel zero = [](const Tensor& x, double) { return Tensor::zeros(x.shape()); };
  CHECK(oracle::bitwise_equal(sample_euler(zero, {2, 2}, FlowConfig{25, 9}), initial_noise({2, 2}, 9)));

  std::vector<double> seen;
  const VelocityModel probe = [&](const Tensor& x, double t) {
    seen.push_back(t);
    return x;
  };
  sample_euler(probe, {1}, FlowConfig{4, 0});
  CHECK(seen == std::vector<double>{1.0, 0.75, 0.5, 0.25});

  const VelocityModel lin = [](const Tensor& x, double t) { return scale(x, t); };
  CHECK(oracle::bitwise_equal(sample_euler(lin, {3}, FlowConfig{7, 5}), sample_euler(lin, {3}, FlowConfig{7, 5})));
  CHECK_THROWS_AS(sample_euler(lin, {3}, FlowConfig{0, 5}), ConfigError);

  const VelocityModel blowup = [](const Tensor& x, double) { return scale(x, 1e300); };
  try {
    sample_euler(blowup, {2}, FlowConfig{3, 1});
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}
