// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/lora.hpp"

#include <cmath>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::depth: return "depth";
    case Condition::normal: return "normal";
    case Condition::lighting: return "lighting";
  }
  return "?";
}

std::optional<Condition> parse_condition(std::string_view name) {
  for (Condition c : kConditions)
    if (condition_name(c) == name) return c;
  return std::nullopt;
}

std::string_view slot_name(Slot s) {
  switch (s) {
    case Slot::q: return "q";
    case Slot::k: return "k";
    case Slot::v: return "v";
  }
  return "?";
}

double default_strength(Condition c) {
  switch (c) {
    case Condition::depth: return kDefaultDepthStrength;
    case Condition::normal: return kDefaultNormalStrength;
    case Condition::lighting: return kDefaultLightingStrength;
  }
  return 1.0;
}

LoraAdapter LoraAdapter::init(std::size_t d, std::size_t r, double strength, Rng& rng) {
  if (r < 1 || 2 * r > d)
    throw ConfigError("LoRA rank " + std::to_string(r) + " must satisfy 1 <= r <= d/2 for d = " +
                      std::to_string(d));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return LoraAdapter{Tensor::uniform({r, d}, rng, -bound, bound, true), Tensor::zeros({d, r}, true),
                     strength};
}

Tensor lora_delta(const Tensor& z, const LoraAdapter& adapter) {
  if (adapter.a.cols() != z.cols() || adapter.b.rows() != z.cols() ||
      adapter.b.cols() != adapter.a.rows())
    throw DimensionError("lora_delta: adapter A " + shape_string(adapter.a.shape()) + ", B " +
                         shape_string(adapter.b.shape()) + " does not fit tokens " +
                         shape_string(z.shape()));
  return scale(matmul_bt(matmul_bt(z, adapter.a), adapter.b), adapter.strength);
}

ConditionAdapterSet ConditionAdapterSet::init(std::size_t d, std::size_t r, Rng& rng) {
  ConditionAdapterSet set;
  for (Condition c : kConditions)
    for (Slot s : kSlots) set.adapter(c, s) = LoraAdapter::init(d, r, default_strength(c), rng);
  return set;
}

const LoraAdapter& ConditionAdapterSet::adapter(Condition c, Slot s) const {
  return adapters_[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
}

LoraAdapter& ConditionAdapterSet::adapter(Condition c, Slot s) {
  return adapters_[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
}

double ConditionAdapterSet::strength(Condition c) const { return adapter(c, Slot::q).strength; }

ConditionAdapterSet set_strength(ConditionAdapterSet adapters, Condition c, double s) {
  if (!(s >= 0.0) || !std::isfinite(s))
    throw ConfigError("strength for " + std::string(condition_name(c)) + " must be a finite value >= 0");
  for (Slot slot : kSlots) adapters.adapter(c, slot).strength = s;
  return adapters;
}

ProjectionWeights ProjectionWeights::init(std::size_t d, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return ProjectionWeights{Tensor::uniform({d, d}, rng, -bound, bound, true),
                           Tensor::uniform({d, d}, rng, -bound, bound, true),
                           Tensor::uniform({d, d}, rng, -bound, bound, true)};
}

QKV project_plain(const Tensor& z, const ProjectionWeights& weights) {
  if (z.cols() != weights.dim())
    throw DimensionError("projection: tokens " + shape_string(z.shape()) + " vs weights " +
                         shape_string(weights.w_q.shape()));
  return QKV{matmul_bt(z, weights.w_q), matmul_bt(z, weights.w_k), matmul_bt(z, weights.w_v)};
}

namespace {

Tensor adapt(const Tensor& plain, const Tensor& z, const LoraAdapter& adapter, Condition c, Slot s) {
  try {
    return add(plain, lora_delta(z, adapter));
  } catch (const DimensionError& e) {
    throw DimensionError("adapter " + std::string(condition_name(c)) + "/" + std::string(slot_name(s)) +
                         ": " + e.what());
  }
}

}  // namespace

QKV project_condition(const Tensor& z_cond, Condition c, const ProjectionWeights& weights,
                      const ConditionAdapterSet& adapters) {
  QKV plain = project_plain(z_cond, weights);
  return QKV{adapt(plain.q, z_cond, adapters.adapter(c, Slot::q), c, Slot::q),
             adapt(plain.k, z_cond, adapters.adapter(c, Slot::k), c, Slot::k),
             adapt(plain.v, z_cond, adapters.adapter(c, Slot::v), c, Slot::v)};
}

QKV project_branches(const Tensor& z, const BranchLayout& layout, const ProjectionWeights& weights,
                     const ConditionAdapterSet& adapters) {
  if (z.rows() != layout.total())
    throw DimensionError("project_branches: " + std::to_string(z.rows()) + " tokens for layout " +
                         to_string(layout));
  if (layout.cond_lengths.size() > kConditionCount)
    throw DimensionError("project_branches: layout has more condition blocks than adapter types");
  if (layout.cond_tokens() == 0) return project_plain(z, weights);

  std::vector<Tensor> q_parts, k_parts, v_parts;
  if (layout.image_tokens() > 0) {
    QKV image = project_plain(slice_rows(z, 0, layout.image_tokens()), weights);
    q_parts.push_back(image.q);
    k_parts.push_back(image.k);
    v_parts.push_back(image.v);
  }
  for (std::size_t k = 0; k < layout.cond_lengths.size(); ++k) {
    if (layout.cond_lengths[k] == 0) continue;
    QKV cond = project_condition(slice_rows(z, layout.cond_offset(k), layout.cond_lengths[k]),
                                 kConditions[k], weights, adapters);
    q_parts.push_back(cond.q);
    k_parts.push_back(cond.k);
    v_parts.push_back(cond.v);
  }
  return QKV{concat_rows(q_parts), concat_rows(k_parts), concat_rows(v_parts)};
}

}  // namespace shaderflow
