// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/lora.hpp"
#include "shaderflow/random.hpp"

using namespace shaderflow;

namespace {

ProjectionWeights identity_weights(std::size_t d) {
  return ProjectionWeights{Tensor::eye(d), Tensor::eye(d), Tensor::eye(d)};
}

// Adapters with random B so every delta is live.
ConditionAdapterSet live_adapters(std::size_t d, std::size_t r, Rng& rng) {
  ConditionAdapterSet set = ConditionAdapterSet::init(d, r, rng);
  for (Condition c : kConditions)
    for (Slot s : kSlots) set.adapter(c, s).b = Tensor::randn({d, r}, rng);
  return set;
}

// Rank of a small dense matrix by Gaussian elimination with partial pivoting,
// counting pivots above tol times the largest entry.
std::size_t numerical_rank(std::vector<double> m, std::size_t n, double tol) {
  double scale = 0.0;
  for (double v : m) scale = std::max(scale, std::abs(v));
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n && rank < n; ++col) {
    std::size_t pivot = rank;
    for (std::size_t r = rank; r < n; ++r)
      if (std::abs(m[r * n + col]) > std::abs(m[pivot * n + col])) pivot = r;
    if (std::abs(m[pivot * n + col]) <= tol * scale) continue;
    for (std::size_t c = 0; c < n; ++c) std::swap(m[rank * n + c], m[pivot * n + c]);
    for (std::size_t r = rank + 1; r < n; ++r) {
      const double f = m[r * n + col] / m[rank * n + col];
      for (std::size_t c = 0; c < n; ++c) m[r * n + c] -= f * m[rank * n + c];
    }
    ++rank;
  }
  return rank;
}

}  // namespace

TEST_CASE("lora_delta examples") {
  Rng rng(1);
  const LoraAdapter fresh = LoraAdapter::init(6, 2, 1.0, rng);
  const Tensor d_fresh = lora_delta(Tensor::randn({3, 6}, rng), fresh);
  for (double v : d_fresh.data()) CHECK(v == 0.0);

  LoraAdapter zero_strength{Tensor::randn({2, 6}, rng), Tensor::randn({6, 2}, rng), 0.0};
  const Tensor d_zero = lora_delta(Tensor::randn({3, 6}, rng), zero_strength);
  for (double v : d_zero.data()) CHECK(v == 0.0);

  const LoraAdapter hand{Tensor({1, 2}, {1, 0}), Tensor({2, 1}, {1, 1}), 1.0};
  CHECK(lora_delta(Tensor({1, 2}, {3, 5}), hand).to_vector() == std::vector<double>{3, 3});

  CHECK_THROWS_AS(lora_delta(Tensor::zeros({1, 3}), hand), DimensionError);
}

TEST_CASE("lora_delta equals the explicit B A product") {
  Rng rng(2);
  const std::size_t d = 8, r = 3;
  const LoraAdapter ad{Tensor::randn({r, d}, rng), Tensor::randn({d, r}, rng), 0.7};
  const Tensor z = Tensor::randn({5, d}, rng);
  const auto ba = oracle::matmul(ad.b.to_vector(), ad.a.to_vector(), d, r, d);
  std::vector<double> ba_t(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) ba_t[j * d + i] = 0.7 * ba[i * d + j];
  const auto want = oracle::matmul(z.to_vector(), ba_t, 5, d, d);
  CHECK(oracle::max_abs_diff(lora_delta(z, ad).data(), want) < 1e-12);
}

TEST_CASE("effective delta has rank at most r") {
  Rng rng(3);
  for (std::size_t r : {1u, 2u, 4u}) {
    const std::size_t d = 8;
    const LoraAdapter ad{Tensor::randn({r, d}, rng), Tensor::randn({d, r}, rng), 1.3};
    const Tensor m = lora_delta(Tensor::eye(d), ad);
    CHECK(numerical_rank(m.to_vector(), d, 1e-10) == r);
  }
}

TEST_CASE("init rules") {
  Rng rng(4);
  const LoraAdapter ad = LoraAdapter::init(16, 4, 1.0, rng);
  CHECK(ad.rank() == 4);
  CHECK(ad.dim() == 16);
  for (double v : ad.b.data()) CHECK(v == 0.0);
  for (double v : ad.a.data()) CHECK(std::abs(v) <= 0.25);
  CHECK_THROWS_AS(LoraAdapter::init(8, 5, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(LoraAdapter::init(8, 0, 1.0, rng), ConfigError);
}

TEST_CASE("strength defaults and set_strength") {
  Rng rng(5);
  const ConditionAdapterSet set = ConditionAdapterSet::init(8, 2, rng);
  CHECK(set.strength(Condition::depth) == 1.0);
  CHECK(set.strength(Condition::normal) == 1.2);
  CHECK(set.strength(Condition::lighting) == 0.8);
  const ConditionAdapterSet changed = set_strength(set, Condition::normal, 0.0);
  CHECK(changed.strength(Condition::normal) == 0.0);
  CHECK(set.strength(Condition::normal) == 1.2);
  for (Slot s : kSlots) CHECK(changed.adapter(Condition::normal, s).strength == 0.0);
  CHECK_THROWS_AS(set_strength(set, Condition::depth, -0.1), ConfigError);
  CHECK(parse_condition("lighting") == Condition::lighting);
  CHECK_FALSE(parse_condition("text").has_value());
}

TEST_CASE("doubling the strength doubles the delta exactly") {
  Rng rng(6);
  const ConditionAdapterSet set = live_adapters(8, 2, rng);
  const Tensor z = Tensor::randn({4, 8}, rng);
  for (Condition c : kConditions)
    for (double s : {0.3, 1.0, 1.7}) {
      const auto once = set_strength(set, c, s);
      const auto twice = set_strength(set, c, 2.0 * s);
      for (Slot slot : kSlots) {
        const Tensor a = lora_delta(z, once.adapter(c, slot));
        const Tensor b = lora_delta(z, twice.adapter(c, slot));
        for (std::size_t i = 0; i < a.numel(); ++i) CHECK(b[i] == 2.0 * a[i]);
      }
    }
}

TEST_CASE("project_branches examples") {
  Rng rng(7);
  const std::size_t d = 6;
  const ProjectionWeights w = ProjectionWeights::init(d, rng);
  const BranchLayout layout{2, 2, {2, 1, 3}};
  const Tensor z = Tensor::randn({layout.total(), d}, rng);
  const QKV fresh = project_branches(z, layout, w, ConditionAdapterSet::init(d, 2, rng));
  const QKV plain = project_plain(z, w);
  CHECK(oracle::bitwise_equal(fresh.q, plain.q));
  CHECK(oracle::bitwise_equal(fresh.k, plain.k));
  CHECK(oracle::bitwise_equal(fresh.v, plain.v));

  ConditionAdapterSet depth_only = ConditionAdapterSet::init(2, 1, rng);
  depth_only.adapter(Condition::depth, Slot::q) = LoraAdapter{Tensor({1, 2}, {1, 0}), Tensor({2, 1}, {1, 1}), 1.0};
  const QKV small = project_branches(Tensor({3, 2}, {1, 2, 7, 9, 3, 5}), {1, 1, {1}}, identity_weights(2), depth_only);
  CHECK(small.q.to_vector() == std::vector<double>{1, 2, 7, 9, 6, 8});
  CHECK(small.k.to_vector() == std::vector<double>{1, 2, 7, 9, 3, 5});

  CHECK_THROWS_AS(project_branches(Tensor::zeros({4, d}), layout, w, depth_only), DimensionError);
}

TEST_CASE("perturbing one adapter leaves rows outside its block untouched") {
  Rng rng(8);
  const std::size_t d = 6;
  const ProjectionWeights w = ProjectionWeights::init(d, rng);
  const BranchLayout layout{3, 2, {2, 3, 2}};
  const Tensor z = Tensor::randn({layout.total(), d}, rng);
  const ConditionAdapterSet base = live_adapters(d, 2, rng);
  const QKV ref = project_branches(z, layout, w, base);
  for (Condition c : kConditions) {
    ConditionAdapterSet changed = base;
    for (Slot s : kSlots) changed.adapter(c, s).b = Tensor::randn({d, 2}, rng);
    const QKV out = project_branches(z, layout, w, changed);
    const std::size_t k = static_cast<std::size_t>(c);
    const std::size_t lo = layout.cond_offset(k), hi = lo + layout.cond_lengths[k];
    for (std::size_t row = 0; row < layout.total(); ++row) {
      const bool inside = row >= lo && row < hi;
      bool same = true;
      for (std::size_t col = 0; col < d; ++col)
        same &= out.q.at(row, col) == ref.q.at(row, col) && out.k.at(row, col) == ref.k.at(row, col) &&
                out.v.at(row, col) == ref.v.at(row, col);
      CHECK_MESSAGE(same != inside, condition_name(c) << " row " << row);
    }
  }
}

TEST_CASE("noise and material rows equal the plain projection under any adapters") {
  Rng rng(9);
  const std::size_t d = 8;
  const ProjectionWeights w = ProjectionWeights::init(d, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const BranchLayout layout{1 + rng.next_u64() % 4, rng.next_u64() % 4,
                              {1 + rng.next_u64() % 3, rng.next_u64() % 3, 1 + rng.next_u64() % 3}};
    const Tensor z = Tensor::randn({layout.total(), d}, rng);
    ConditionAdapterSet set = live_adapters(d, 1 + rng.next_u64() % 4, rng);
    for (Condition c : kConditions) set = set_strength(set, c, rng.uniform(0.0, 3.0));
    const QKV out = project_branches(z, layout, w, set);
    const QKV plain = project_plain(slice_rows(z, 0, layout.image_tokens()), w);
    CHECK(oracle::bitwise_equal(slice_rows(out.q, 0, layout.image_tokens()), plain.q));
    CHECK(oracle::bitwise_equal(slice_rows(out.k, 0, layout.image_tokens()), plain.k));
    CHECK(oracle::bitwise_equal(slice_rows(out.v, 0, layout.image_tokens()), plain.v));
  }
}
