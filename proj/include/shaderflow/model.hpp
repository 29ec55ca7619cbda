// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shaderflow/attention.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/flow.hpp"
#include "shaderflow/lora.hpp"
#include "shaderflow/tensor.hpp"

namespace shaderflow {

struct ModelConfig {
  std::size_t d_model = 16;
  std::size_t n_blocks = 2;
  std::size_t n_heads = 1;
  std::size_t lora_rank = 4;
  std::size_t patch_size = 1;
  std::size_t grid_h = 8;
  std::size_t grid_w = 8;
  std::size_t mlp_mult = 4;
  double learning_rate = 1e-4;
  double rope_base = 10000.0;
  double ln_eps = 1e-5;

  void validate() const;
  std::size_t tokens_per_map() const { return (grid_h / patch_size) * (grid_w / patch_size); }
  std::size_t head_dim() const { return d_model / n_heads; }
};

enum class Role : std::size_t { noise = 0, material = 1, depth = 2, normal = 3, lighting = 4 };
inline constexpr std::size_t kRoleCount = 5;
std::string_view role_name(Role r);
std::size_t role_channels(Role r);
Role condition_role(Condition c);

// channels x height x width, channel-major.
struct LatentImage {
  Role role = Role::noise;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  static LatentImage zeros(Role role, std::size_t height, std::size_t width);
  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  // Role-specific value checks: depth in [0, 1], unit normals, lighting >= 0.
  void validate() const;
};

// [tokens x channels * p * p], tokens in row-major patch order, features
// ordered (channel, dy, dx).
Tensor patchify(const LatentImage& image, std::size_t patch_size);
LatentImage unpatchify(const Tensor& tokens, Role role, std::size_t height, std::size_t width,
                       std::size_t patch_size);

struct ConditionImages {
  LatentImage material;
  std::array<std::optional<LatentImage>, kConditionCount> conds;

  const std::optional<LatentImage>& cond(Condition c) const { return conds[static_cast<std::size_t>(c)]; }
  std::optional<LatentImage>& cond(Condition c) { return conds[static_cast<std::size_t>(c)]; }
};

struct ConditionPatches {
  Tensor material;
  std::array<std::optional<Tensor>, kConditionCount> conds;

  const std::optional<Tensor>& cond(Condition c) const { return conds[static_cast<std::size_t>(c)]; }
};

ConditionPatches patchify_conditions(const ConditionImages& images, const ModelConfig& cfg);
// Drops one condition (leave-one-out ablation).
ConditionPatches without(ConditionPatches patches, Condition c);

struct BlockParams {
  ProjectionWeights proj;
  Tensor w_out;  // [d x d]
  Tensor w1;     // [d x h]
  Tensor b1;     // [h]
  Tensor w2;     // [h x d]
  Tensor b2;     // [d]
  ConditionAdapterSet adapters;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool adapter;
};

struct ModelState {
  ModelConfig cfg;
  std::array<Tensor, kRoleCount> embed_w;  // [channels*p*p x d]
  std::array<Tensor, kRoleCount> embed_b;  // [d]
  Tensor time_w;                           // [d x d]
  Tensor time_b;                           // [d]
  std::vector<BlockParams> blocks;
  Tensor head_w;  // [d x 3*p*p], zero at init
  Tensor head_b;  // [3*p*p]

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<ParamRef> parameters();
  ModelState clone() const;
  std::size_t patch_dim(Role r) const { return role_channels(r) * cfg.patch_size * cfg.patch_size; }
};

ModelState with_strength(ModelState state, Condition c, double s);

struct TokenSequence {
  Tensor z;
  BranchLayout layout;
  std::vector<std::size_t> positions;
};

// Grid position (row-major patch index) of every token in a block.
std::vector<std::size_t> grid_positions(std::size_t tokens);

Tensor embed_role(const ModelState& state, Role role, const Tensor& patches);
// [noise, material, depth, normal, lighting] blocks; missing conditions get
// length 0 in the layout.
TokenSequence tokenize(const ModelState& state, const Tensor& noise_patches, const ConditionPatches& conds);

// Sinusoidal features of t projected to a [d] row.
Tensor time_embedding(const ModelState& state, double t);

// Pieces of one transformer block, shared with the cached path.
Tensor attention_output(const BlockParams& block, const Tensor& attended);
Tensor mlp_residual(const BlockParams& block, const Tensor& h, double ln_eps);
Tensor velocity_head(const ModelState& state, const Tensor& noise_hidden);

// Per-block post-RoPE K and V of every token, plus the last hidden state.
struct ForwardTrace {
  std::vector<Tensor> keys;
  std::vector<Tensor> values;
  Tensor hidden;
};

// Velocity prediction [n_noise x 3*p*p]. t is added (embedded) to noise rows
// only; attention runs under the SCMA mask.
Tensor forward(const ModelState& state, const TokenSequence& tokens, double t, ForwardTrace* trace = nullptr);

VelocityModel uncached_velocity(const ModelState& state, const ConditionPatches& conds);
Shape noise_shape(const ModelState& state);
Tensor sample_uncached(const ModelState& state, const ConditionPatches& conds, const FlowConfig& cfg);

// ---- data and training -----------------------------------------------------

struct ToySample {
  LatentImage material;
  LatentImage depth;
  LatentImage normal;
  LatentImage lighting;
  LatentImage target;

  ConditionImages conditions() const;
};

struct ToyDataset {
  std::vector<ToySample> samples;
};

// target = mean material color inside depth < 0.5, times lighting; 0 elsewhere.
ToyDataset make_synthetic_dataset(std::size_t count, std::size_t height, std::size_t width,
                                  std::uint64_t seed);
void save_dataset(const std::string& dir, const ToyDataset& dataset);
ToyDataset load_dataset(const std::string& dir);

struct TrainOptions {
  std::size_t steps = 0;
  double learning_rate = 1e-4;
  bool frozen_base = false;
  std::uint64_t seed = 0;
  double divergence_limit = 1e6;
};

struct TrainResult {
  std::vector<double> losses;
};

struct TrainingDiverged : NumericError {
  TrainingDiverged(const std::string& what, std::vector<double> trace)
      : NumericError(what), losses(std::move(trace)) {}
  std::vector<double> losses;
};

// Plain SGD, batch size 1, on the flow-matching loss.
TrainResult train(ModelState& state, const ToyDataset& dataset, const TrainOptions& options);

// Mean of the first / last `window` entries.
double initial_smoothed(const std::vector<double>& losses, std::size_t window);
double final_smoothed(const std::vector<double>& losses, std::size_t window);

// ---- checkpoints -------------------------------------------------------------

void save_checkpoint(const std::string& dir, ModelState& state);
ModelState load_checkpoint(const std::string& dir);

}  // namespace shaderflow
