// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/model.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {

TrainResult train(ModelState& state, const ToyDataset& dataset, const TrainOptions& options) {
  if (dataset.samples.empty()) throw ConfigError("train: dataset is empty");
  if (!(options.learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");

  std::vector<ConditionPatches> conds;
  std::vector<Tensor> targets;
  for (const ToySample& s : dataset.samples) {
    conds.push_back(patchify_conditions(s.conditions(), state.cfg));
    targets.push_back(patchify(s.target, state.cfg.patch_size));
  }

  Rng rng(options.seed);
  TrainResult result;
  std::vector<ParamRef> params = state.parameters();
  for (ParamRef& p : params) p.tensor->zero_grad();

  for (std::size_t step = 0; step < options.steps; ++step) {
    const std::size_t index = static_cast<std::size_t>(rng.next_u64() % dataset.samples.size());
    const FlowSample sample = draw_flow_sample(targets[index], rng);
    const Tensor loss = cfm_loss_at(uncached_velocity(state, conds[index]), sample);
    const double value = loss.item();
    result.losses.push_back(value);
    if (!std::isfinite(value) || value > options.divergence_limit)
      throw TrainingDiverged("training diverged at step " + std::to_string(step) + " (loss " +
                                 std::to_string(value) + ")",
                             result.losses);
    loss.backward();
    for (ParamRef& p : params) {
      Tensor& t = *p.tensor;
      if (options.frozen_base && !p.adapter) {
        t.zero_grad();
        continue;
      }
      std::vector<double> values = t.to_vector();
      const std::vector<double> grad = t.grad();
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= options.learning_rate * grad[i];
      t = Tensor(t.shape(), std::move(values), true);
    }
  }
  return result;
}

double initial_smoothed(const std::vector<double>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  return std::accumulate(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

double final_smoothed(const std::vector<double>& losses, std::size_t window) {
  const std::size_t n = std::min(window, losses.size());
  if (n == 0) return 0.0;
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n), losses.end(), 0.0) / static_cast<double>(n);
}

}  // namespace shaderflow
