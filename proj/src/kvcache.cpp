// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/kvcache.hpp"

#include <string>

#include "shaderflow/errors.hpp"

namespace shaderflow {

KVCacheStore::KVCacheStore(const KVCacheStore& other) : entries_(other.entries_), material_(other.material_) {
  for (std::size_t i = 0; i < kConditionCount; ++i)
    counts_[i].store(other.counts_[i].load(std::memory_order_relaxed), std::memory_order_relaxed);
}

KVCacheStore& KVCacheStore::operator=(const KVCacheStore& other) {
  if (this == &other) return *this;
  entries_ = other.entries_;
  material_ = other.material_;
  for (std::size_t i = 0; i < kConditionCount; ++i)
    counts_[i].store(other.counts_[i].load(std::memory_order_relaxed), std::memory_order_relaxed);
  return *this;
}

const ConditionKV& KVCacheStore::get(Condition c) const {
  if (!has(c)) throw ConfigError("kv cache holds no entry for " + std::string(condition_name(c)));
  return *entries_[index(c)];
}

void KVCacheStore::put(Condition c, ConditionKV kv) { entries_[index(c)] = std::move(kv); }

const ConditionKV& KVCacheStore::material() const {
  if (!material_) throw ConfigError("kv cache holds no material entry");
  return *material_;
}

void KVCacheStore::put_material(ConditionKV kv) { material_ = std::move(kv); }

namespace {

ConditionKV run_condition_branch(const ModelState& state, Condition c, const Tensor& patches) {
  const ModelConfig& cfg = state.cfg;
  const RopeFrequencies freqs = RopeFrequencies::make(cfg.head_dim(), cfg.rope_base);
  const std::vector<std::size_t> positions = grid_positions(patches.rows());
  ConditionKV kv;
  Tensor h = embed_role(state, condition_role(c), patches);
  for (const BlockParams& block : state.blocks) {
    const QKV qkv = project_condition(layer_norm(h, cfg.ln_eps), c, block.proj, block.adapters);
    const Tensor q = apply_rope(qkv.q, positions, freqs);
    const Tensor k = apply_rope(qkv.k, positions, freqs);
    kv.keys.push_back(k);
    kv.values.push_back(qkv.v);
    h = add(h, attention_output(block, mma(q, k, qkv.v, AttentionMask{}, cfg.n_heads)));
    h = mlp_residual(block, h, cfg.ln_eps);
  }
  return kv;
}

void check_store(const KVCacheStore& store, const ConditionPatches& conds) {
  for (Condition c : kConditions)
    if (store.has(c) != conds.cond(c).has_value())
      throw ConfigError("kv cache mismatch: " + std::string(condition_name(c)) +
                        (store.has(c) ? " is cached but not supplied" : " is supplied but not cached"));
}

}  // namespace

KVCacheStore precompute_condition_kv(const ModelState& state, const ConditionPatches& conds,
                                     const CacheOptions& options) {
  KVCacheStore store;
  for (Condition c : kConditions) {
    const auto& patches = conds.cond(c);
    if (!patches) continue;
    store.put(c, run_condition_branch(state, c, *patches));
    store.note_computation(c);
  }
  if (options.cache_material) {
    const ModelConfig& cfg = state.cfg;
    const BlockParams& first = state.blocks.front();
    const Tensor a = layer_norm(embed_role(state, Role::material, conds.material), cfg.ln_eps);
    const RopeFrequencies freqs = RopeFrequencies::make(cfg.head_dim(), cfg.rope_base);
    ConditionKV kv;
    kv.keys.push_back(apply_rope(matmul_bt(a, first.proj.w_k), grid_positions(a.rows()), freqs));
    kv.values.push_back(matmul_bt(a, first.proj.w_v));
    store.put_material(std::move(kv));
  }
  return store;
}

Tensor cached_forward(const ModelState& state, const Tensor& noise_patches, const ConditionPatches& conds,
                      const KVCacheStore& store, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("cached_forward: t = " + std::to_string(t) + " outside [0, 1]");
  check_store(store, conds);
  const ModelConfig& cfg = state.cfg;
  const std::size_t per_map = cfg.tokens_per_map();
  if (noise_patches.rows() != per_map || conds.material.rows() != per_map)
    throw DimensionError("cached_forward: image blocks must have " + std::to_string(per_map) + " tokens");
  for (Condition c : kConditions)
    if (store.has(c) && store.get(c).keys.size() != state.blocks.size())
      throw ConfigError("kv cache was built for a different block count");

  const Tensor noise = add_row(embed_role(state, Role::noise, noise_patches), time_embedding(state, t));
  const std::vector<Tensor> image{noise, embed_role(state, Role::material, conds.material)};
  Tensor h = concat_rows(image);

  const RopeFrequencies freqs = RopeFrequencies::make(cfg.head_dim(), cfg.rope_base);
  const std::vector<std::size_t> grid = grid_positions(per_map);
  std::vector<std::size_t> image_positions = grid;
  image_positions.insert(image_positions.end(), grid.begin(), grid.end());

  for (std::size_t b = 0; b < state.blocks.size(); ++b) {
    const BlockParams& block = state.blocks[b];
    const Tensor a = layer_norm(h, cfg.ln_eps);
    Tensor q, k_img, v_img;
    if (b == 0 && store.has_material()) {
      const Tensor a_noise = slice_rows(a, 0, per_map);
      const QKV noise_qkv = project_plain(a_noise, block.proj);
      const std::vector<Tensor> q_parts{noise_qkv.q, matmul_bt(slice_rows(a, per_map, per_map), block.proj.w_q)};
      q = apply_rope(concat_rows(q_parts), image_positions, freqs);
      const std::vector<Tensor> k_parts{apply_rope(noise_qkv.k, grid, freqs), store.material().keys[0]};
      const std::vector<Tensor> v_parts{noise_qkv.v, store.material().values[0]};
      k_img = concat_rows(k_parts);
      v_img = concat_rows(v_parts);
    } else {
      const QKV qkv = project_plain(a, block.proj);
      q = apply_rope(qkv.q, image_positions, freqs);
      k_img = apply_rope(qkv.k, image_positions, freqs);
      v_img = qkv.v;
    }
    std::vector<Tensor> keys{k_img}, values{v_img};
    for (Condition c : kConditions)
      if (store.has(c)) {
        keys.push_back(store.get(c).keys[b]);
        values.push_back(store.get(c).values[b]);
      }
    // Image rows attend to every token, so no mask is needed here.
    h = add(h, attention_output(block, mma(q, concat_rows(keys), concat_rows(values), AttentionMask{}, cfg.n_heads)));
    h = mlp_residual(block, h, cfg.ln_eps);
  }
  return velocity_head(state, slice_rows(h, 0, per_map));
}

VelocityModel cached_velocity(const ModelState& state, const ConditionPatches& conds, KVCacheStore& store,
                              const CacheOptions& options) {
  return [&state, &conds, &store, options, ready = false](const Tensor& xt, double t) mutable {
    if (!ready) {
      store = precompute_condition_kv(state, conds, options);
      ready = true;
    }
    return cached_forward(state, xt, conds, store, t);
  };
}

Tensor sample_cached(const ModelState& state, const ConditionPatches& conds, const FlowConfig& cfg,
                     KVCacheStore* store, const CacheOptions& options) {
  NoGradGuard no_grad;
  KVCacheStore local;
  KVCacheStore& target = store ? *store : local;
  return sample_euler(cached_velocity(state, conds, target, options), noise_shape(state), cfg);
}

}  // namespace shaderflow
