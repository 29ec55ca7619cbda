// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "oracles.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/kernels.hpp"
#include "shaderflow/kvcache.hpp"
#include "shaderflow/random.hpp"

using namespace shaderflow;

namespace {

Tensor noise_for(const ModelState& state, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(noise_shape(state), rng);
}

bool same_store(const KVCacheStore& a, const KVCacheStore& b) {
  for (Condition c : kConditions) {
    if (a.has(c) != b.has(c)) return false;
    if (!a.has(c)) continue;
    for (std::size_t blk = 0; blk < a.get(c).keys.size(); ++blk)
      if (!oracle::bitwise_equal(a.get(c).keys[blk], b.get(c).keys[blk]) ||
          !oracle::bitwise_equal(a.get(c).values[blk], b.get(c).values[blk]))
        return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cached forward equals the full forward bit for bit") {
  ModelConfig cfg = oracle::small_config();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ModelState state = oracle::generic_state(cfg, 20 + seed);
    const ConditionPatches conds = oracle::toy_conditions(cfg, 20 + seed);
    const KVCacheStore store = precompute_condition_kv(state, conds);
    const Tensor x = noise_for(state, seed);
    for (double t : {0.0, 0.3, 1.0}) {
      const Tensor full = forward(state, tokenize(state, x, conds), t);
      const Tensor cached = cached_forward(state, x, conds, store, t);
      CHECK(oracle::max_abs_diff(full.data(), cached.data()) == 0.0);
    }
  }
}

TEST_CASE("cached sampling matches uncached sampling and computes each condition once") {
  ModelConfig cfg = oracle::small_config();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelState state = oracle::generic_state(cfg, 30 + seed);
    const ConditionPatches conds = oracle::toy_conditions(cfg, 30 + seed);
    for (std::size_t steps : {1u, 5u, 25u}) {
      const FlowConfig fc{steps, seed};
      KVCacheStore store;
      const Tensor cached = sample_cached(state, conds, fc, &store);
      const Tensor plain = sample_uncached(state, conds, fc);
      CHECK(oracle::max_abs_diff(cached.data(), plain.data()) < 1e-10);
      for (Condition c : kConditions) CHECK(store.computations(c) == 1);
    }
  }
}

TEST_CASE("store contents equal slices of an uncached pass") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 40);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 40);
  const KVCacheStore store = precompute_condition_kv(state, conds);
  const TokenSequence seq = tokenize(state, noise_for(state, 1), conds);
  ForwardTrace trace;
  forward(state, seq, 0.5, &trace);
  for (Condition c : kConditions) {
    const std::size_t k = static_cast<std::size_t>(c);
    const std::size_t lo = seq.layout.cond_offset(k), n = seq.layout.cond_lengths[k];
    REQUIRE(store.get(c).keys.size() == cfg.n_blocks);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
      CHECK(oracle::bitwise_equal(store.get(c).keys[b], slice_rows(trace.keys[b], lo, n)));
      CHECK(oracle::bitwise_equal(store.get(c).values[b], slice_rows(trace.values[b], lo, n)));
    }
  }
  CHECK(same_store(store, precompute_condition_kv(state, conds)));
}

TEST_CASE("absent conditions are skipped; the store must match the conditions used") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 41);
  ConditionPatches conds = oracle::toy_conditions(cfg, 41);
  ConditionPatches none = conds;
  for (Condition c : kConditions) none = without(none, c);
  const KVCacheStore empty = precompute_condition_kv(state, none);
  for (Condition c : kConditions) {
    CHECK_FALSE(empty.has(c));
    CHECK(empty.computations(c) == 0);
  }
  CHECK_THROWS_AS(empty.get(Condition::depth), ConfigError);

  const Tensor x = noise_for(state, 2);
  CHECK(oracle::max_abs_diff(cached_forward(state, x, none, empty, 0.4).data(),
                             forward(state, tokenize(state, x, none), 0.4).data()) == 0.0);
  CHECK_THROWS_AS(cached_forward(state, x, conds, empty, 0.4), ConfigError);
  const KVCacheStore full = precompute_condition_kv(state, conds);
  CHECK_THROWS_AS(cached_forward(state, x, none, full, 0.4), ConfigError);
  CHECK_THROWS_AS(cached_forward(state, x, conds, full, 1.4), ConfigError);
}

TEST_CASE("leave-one-out through the cache equals leave-one-out without it") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 42);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 42);
  const Tensor x = noise_for(state, 3);
  for (Condition c : kConditions) {
    const ConditionPatches dropped = without(conds, c);
    const KVCacheStore store = precompute_condition_kv(state, dropped);
    CHECK_FALSE(store.has(c));
    const Tensor cached = cached_forward(state, x, dropped, store, 0.6);
    const Tensor full = forward(state, tokenize(state, x, dropped), 0.6);
    CHECK(oracle::max_abs_diff(cached.data(), full.data()) < 1e-10);
  }
}

TEST_CASE("cached steps do fewer multiplies than uncached ones") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 43);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 43);
  const KVCacheStore store = precompute_condition_kv(state, conds);
  const Tensor x = noise_for(state, 4);
  NoGradGuard guard;
  kernels::reset_multiply_count();
  forward(state, tokenize(state, x, conds), 0.5);
  const auto uncached = kernels::multiply_count();
  kernels::reset_multiply_count();
  cached_forward(state, x, conds, store, 0.5);
  const auto cached = kernels::multiply_count();
  CHECK(cached < uncached);

  // The per-step cost of the cached path does not depend on the condition
  // branches beyond their K/V length.
  kernels::reset_multiply_count();
  cached_forward(state, x, conds, store, 0.9);
  CHECK(kernels::multiply_count() == cached);
}

TEST_CASE("material caching keeps the result exact") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 44);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 44);
  const KVCacheStore store = precompute_condition_kv(state, conds, CacheOptions{true});
  CHECK(store.has_material());
  const Tensor x = noise_for(state, 5);
  CHECK(oracle::max_abs_diff(cached_forward(state, x, conds, store, 0.2).data(),
                             forward(state, tokenize(state, x, conds), 0.2).data()) < 1e-10);
  KVCacheStore filled;
  const Tensor a = sample_cached(state, conds, FlowConfig{5, 1}, &filled, CacheOptions{true});
  CHECK(filled.has_material());
  CHECK(oracle::max_abs_diff(a.data(), sample_uncached(state, conds, FlowConfig{5, 1}).data()) < 1e-10);
}

TEST_CASE("multi-head models cache exactly too") {
  ModelConfig cfg = oracle::small_config();
  cfg.n_heads = 2;
  const ModelState state = oracle::generic_state(cfg, 45);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 45);
  KVCacheStore store;
  const Tensor a = sample_cached(state, conds, FlowConfig{4, 2}, &store);
  CHECK(oracle::max_abs_diff(a.data(), sample_uncached(state, conds, FlowConfig{4, 2}).data()) < 1e-10);
}

TEST_CASE("cached_velocity fills the store once") {
  ModelConfig cfg = oracle::small_config();
  const ModelState state = oracle::generic_state(cfg, 46);
  const ConditionPatches conds = oracle::toy_conditions(cfg, 46);
  KVCacheStore store;
  const VelocityModel v = cached_velocity(state, conds, store);
  const Tensor x = noise_for(state, 6);
  for (double t : {1.0, 0.5, 0.25}) v(x, t);
  for (Condition c : kConditions) CHECK(store.computations(c) == 1);

  KVCacheStore copy = store;
  CHECK(same_store(copy, store));
  CHECK(copy.computations(Condition::normal) == 1);
}
