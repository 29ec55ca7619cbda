// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <optional>
#include <vector>

#include "shaderflow/flow.hpp"
#include "shaderflow/model.hpp"

namespace shaderflow {

// Post-RoPE keys and values of one condition branch, one entry per block.
struct ConditionKV {
  std::vector<Tensor> keys;
  std::vector<Tensor> values;
};

// Condition rows only ever attend to their own block, so their K/V never
// depend on x_t or t. They are computed once per sampling run.
class KVCacheStore {
 public:
  KVCacheStore() = default;
  KVCacheStore(const KVCacheStore& other);
  KVCacheStore& operator=(const KVCacheStore& other);

  bool has(Condition c) const { return entries_[index(c)].has_value(); }
  const ConditionKV& get(Condition c) const;
  void put(Condition c, ConditionKV kv);

  // Material K/V of the first block only; later blocks mix in noise rows.
  bool has_material() const { return material_.has_value(); }
  const ConditionKV& material() const;
  void put_material(ConditionKV kv);

  // Number of per-condition precompute passes run into this store.
  std::size_t computations(Condition c) const { return counts_[index(c)].load(std::memory_order_relaxed); }
  void note_computation(Condition c) { counts_[index(c)].fetch_add(1, std::memory_order_relaxed); }

 private:
  static std::size_t index(Condition c) { return static_cast<std::size_t>(c); }

  std::array<std::optional<ConditionKV>, kConditionCount> entries_;
  std::optional<ConditionKV> material_;
  std::array<std::atomic<std::size_t>, kConditionCount> counts_{};
};

struct CacheOptions {
  bool cache_material = false;
};

// Runs every present condition branch through all blocks on its own.
KVCacheStore precompute_condition_kv(const ModelState& state, const ConditionPatches& conds,
                                     const CacheOptions& options = {});

// Velocity for noise rows using cached condition K/V. Bitwise equal to
// forward() on the same inputs. Throws ConfigError if the store does not hold
// exactly the conditions present in `conds`.
Tensor cached_forward(const ModelState& state, const Tensor& noise_patches, const ConditionPatches& conds,
                      const KVCacheStore& store, double t);

// Fills `store` on the first call, then reuses it.
VelocityModel cached_velocity(const ModelState& state, const ConditionPatches& conds, KVCacheStore& store,
                              const CacheOptions& options = {});

Tensor sample_cached(const ModelState& state, const ConditionPatches& conds, const FlowConfig& cfg,
                     KVCacheStore* store = nullptr, const CacheOptions& options = {});

}  // namespace shaderflow
