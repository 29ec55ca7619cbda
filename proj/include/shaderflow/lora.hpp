// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include "shaderflow/attention.hpp"
#include "shaderflow/tensor.hpp"

namespace shaderflow {

class Rng;

enum class Condition : std::size_t { depth = 0, normal = 1, lighting = 2 };
inline constexpr std::size_t kConditionCount = 3;
inline constexpr std::array<Condition, kConditionCount> kConditions{Condition::depth, Condition::normal,
                                                                    Condition::lighting};

std::string_view condition_name(Condition c);
std::optional<Condition> parse_condition(std::string_view name);

enum class Slot : std::size_t { q = 0, k = 1, v = 2 };
inline constexpr std::array<Slot, 3> kSlots{Slot::q, Slot::k, Slot::v};
std::string_view slot_name(Slot s);

inline constexpr double kDefaultDepthStrength = 1.0;
inline constexpr double kDefaultNormalStrength = 1.2;
inline constexpr double kDefaultLightingStrength = 0.8;
double default_strength(Condition c);

// Low-rank pair: delta(Z) = strength * Z A^T B^T for row tokens Z[n x d].
struct LoraAdapter {
  Tensor a;  // [r x d]
  Tensor b;  // [d x r]
  double strength = 1.0;

  std::size_t rank() const { return a.rows(); }
  std::size_t dim() const { return a.cols(); }

  // A ~ U(-1/sqrt(d), 1/sqrt(d)), B = 0. Requires 1 <= r <= d/2.
  static LoraAdapter init(std::size_t d, std::size_t r, double strength, Rng& rng);
};

Tensor lora_delta(const Tensor& z, const LoraAdapter& adapter);

// Q/K/V adapters for every condition type.
class ConditionAdapterSet {
 public:
  ConditionAdapterSet() = default;
  static ConditionAdapterSet init(std::size_t d, std::size_t r, Rng& rng);

  const LoraAdapter& adapter(Condition c, Slot s) const;
  LoraAdapter& adapter(Condition c, Slot s);
  double strength(Condition c) const;
  std::size_t rank() const { return adapters_[0][0].rank(); }

 private:
  std::array<std::array<LoraAdapter, 3>, kConditionCount> adapters_;
};

// Returns a copy with every slot of condition c scaled by s >= 0.
ConditionAdapterSet set_strength(ConditionAdapterSet adapters, Condition c, double s);

// Shared across all branches, row-token convention: Q = Z W_Q^T.
struct ProjectionWeights {
  Tensor w_q, w_k, w_v;  // [d x d]

  static ProjectionWeights init(std::size_t d, Rng& rng);
  std::size_t dim() const { return w_q.rows(); }
};

struct QKV {
  Tensor q, k, v;
};

// Plain projections for the noise/material rows; condition block k of the
// layout additionally gets the adapter delta of condition k.
QKV project_branches(const Tensor& z, const BranchLayout& layout, const ProjectionWeights& weights,
                     const ConditionAdapterSet& adapters);

// Projections of a standalone condition block, identical to the rows
// project_branches produces for that block.
QKV project_condition(const Tensor& z_cond, Condition c, const ProjectionWeights& weights,
                      const ConditionAdapterSet& adapters);

// Plain projections, no adapters.
QKV project_plain(const Tensor& z, const ProjectionWeights& weights);

}  // namespace shaderflow
