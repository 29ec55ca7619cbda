// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "shaderflow/config.hpp"
#include "shaderflow/ensemble.hpp"
#include "shaderflow/gradcheck.hpp"
#include "shaderflow/kernels.hpp"
#include "shaderflow/kvcache.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow::checks {
namespace {

CheckResult pass() { return {}; }

CheckResult fail(const std::string& why) { return {false, why}; }

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << parts);
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Tensor with_entry(const Tensor& t, std::size_t index, double delta) {
  std::vector<double> v = t.to_vector();
  v[index] += delta;
  return Tensor(t.shape(), std::move(v));
}

// Random weights everywhere, including adapter B and the head, so no path is
// trivially zero.
ModelState generic_state(const ModelConfig& cfg, std::uint64_t seed) {
  ModelState state = ModelState::init(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (ParamRef& p : state.parameters())
    if (p.adapter || p.name.rfind("head.", 0) == 0) *p.tensor = Tensor::uniform(p.tensor->shape(), rng, -0.3, 0.3, true);
  return state;
}

ConditionPatches random_conditions(const ModelConfig& cfg, std::uint64_t seed) {
  const ToyDataset ds = make_synthetic_dataset(1, cfg.grid_h, cfg.grid_w, seed);
  return patchify_conditions(ds.samples.front().conditions(), cfg);
}

BranchLayout small_layout(Rng& rng) {
  BranchLayout layout;
  layout.n_noise = 1 + rng.next_u64() % 3;
  layout.n_material = rng.next_u64() % 3;
  for (int k = 0; k < 3; ++k) layout.cond_lengths.push_back(1 + rng.next_u64() % 3);
  return layout;
}

// ---- tensor ------------------------------------------------------------------

CheckResult tensor_gradcheck() {
  Rng rng(11);
  const Tensor w = Tensor::randn({4, 3}, rng);
  const Tensor x = Tensor::randn({5, 4}, rng, 1.0, true);
  auto f = [&](const Tensor& in) {
    return sum(square(tanh(layer_norm(matmul(in, w), 1e-5))));
  };
  const Tensor loss = f(x);
  loss.backward();
  const Tensor numeric = finite_diff_grad([&](const Tensor& in) { return f(in).item(); }, x, 1e-5);
  const double err = relative_error(x.grad(), numeric.data());
  if (err > 1e-6) return fail(cat("relative error ", err));
  return pass();
}

CheckResult tensor_transpose() {
  Rng rng(12);
  const Tensor a = Tensor::randn({3, 5}, rng);
  if (!same_values(transpose(transpose(a)), a)) return fail("transpose is not an involution");
  return pass();
}

// ---- kernels -----------------------------------------------------------------

CheckResult kernels_equivalence() {
  using kernels::Isa;
  if (!kernels::isa_available(Isa::avx2)) return {true, "avx2 unavailable; scalar only"};
  const auto& s = kernels::table(Isa::scalar);
  const auto& v = kernels::table(Isa::avx2);
  Rng rng(13);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.next_u64() % 7, k = 1 + rng.next_u64() % 37, n = 1 + rng.next_u64() % 41;
    std::vector<double> a(m * k), b(k * n), cs(m * n), cv(m * n);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    s.gemm(a.data(), b.data(), cs.data(), m, k, n);
    v.gemm(a.data(), b.data(), cv.data(), m, k, n);
    for (std::size_t i = 0; i < cs.size(); ++i)
      if (std::abs(cs[i] - cv[i]) > 1e-12 * (1.0 + std::abs(cs[i])))
        return fail(cat("gemm differs at ", i, " for ", m, "x", k, "x", n));
    const double ds = s.dot(a.data(), a.data(), a.size()), dv = v.dot(a.data(), a.data(), a.size());
    if (std::abs(ds - dv) > 1e-12 * (1.0 + std::abs(ds))) return fail("dot differs");
    if (s.max(b.data(), b.size()) != v.max(b.data(), b.size())) return fail("max differs");
  }
  return pass();
}

CheckResult kernels_row_independence() {
  Rng rng(14);
  const Tensor a = Tensor::randn({6, 9}, rng), b = Tensor::randn({11, 9}, rng);
  const Tensor full = matmul_bt(a, b);
  for (std::size_t r = 0; r < a.rows(); ++r)
    if (!same_values(matmul_bt(slice_rows(a, r, 1), b), slice_rows(full, r, 1)))
      return fail(cat("row ", r, " depends on the rows around it"));
  return pass();
}

// ---- scma / causal -------------------------------------------------------------

CheckResult scma_isolation() {
  Rng rng(15);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const BranchLayout layout = small_layout(rng);
    const std::size_t n = layout.total(), d = 4;
    const Tensor q = Tensor::randn({n, d}, rng), k = Tensor::randn({n, d}, rng), v = Tensor::randn({n, d}, rng);
    const AttentionMask mask = build_scma_mask(layout);
    const Tensor base = mma(q, k, v, mask);
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t row = layout.cond_offset(a);
      const Tensor out = mma(q, k, with_entry(v, row * d, 1.0), mask);
      for (std::size_t b = 0; b < 3; ++b) {
        if (b == a) continue;
        const std::size_t off = layout.cond_offset(b), len = layout.cond_lengths[b];
        if (!same_values(slice_rows(out, off, len), slice_rows(base, off, len)))
          return fail(cat("condition ", b, " sees condition ", a, " in layout ", to_string(layout)));
      }
    }
  }
  return pass();
}

CheckResult scma_aggregation() {
  Rng rng(16);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    BranchLayout layout = small_layout(rng);
    layout.n_material = 1 + layout.n_material;
    const std::size_t n = layout.total(), d = 4;
    const Tensor q = Tensor::randn({n, d}, rng), k = Tensor::randn({n, d}, rng), v = Tensor::randn({n, d}, rng);
    const AttentionMask mask = build_scma_mask(layout);
    const Tensor base = slice_rows(mma(q, k, v, mask), 0, layout.n_noise);
    for (std::size_t block = 0; block < layout.block_count(); ++block) {
      std::size_t first = 0;
      while (layout.block_of(first) != block) ++first;
      const Tensor out = slice_rows(mma(q, k, with_entry(v, first * d, 0.5), mask), 0, layout.n_noise);
      if (same_values(out, base)) return fail(cat("noise rows ignore block ", block));
    }
  }
  return pass();
}

CheckResult scma_dump_roundtrip() {
  BranchLayout layout{2, 2, {1, 1, 1}};
  const AttentionMask mask = build_scma_mask(layout);
  const AttentionMask back = AttentionMask::parse_dump(mask.dump());
  if (!std::equal(mask.entries().begin(), mask.entries().end(), back.entries().begin(), back.entries().end()))
    return fail("dump does not parse back to the same mask");
  return pass();
}

CheckResult causal_structure() {
  for (std::size_t n = 1; n <= 8; ++n) {
    const AttentionMask m = build_causal_mask(n);
    if (m.allowed_count() != n * (n + 1) / 2) return fail(cat("n=", n, ": wrong zero count"));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (m.allows(i, j) != (j <= i)) return fail(cat("n=", n, ": entry (", i, ",", j, ")"));
  }
  return pass();
}

CheckResult causal_future_invariance() {
  Rng rng(17);
  const std::size_t n = 6, d = 4;
  const Tensor q = Tensor::randn({n, d}, rng), k = Tensor::randn({n, d}, rng), v = Tensor::randn({n, d}, rng);
  const AttentionMask mask = build_causal_mask(n);
  const Tensor base = mma(q, k, v, mask);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t later = (i + 1) * d;
    const Tensor out = mma(q, with_entry(k, later, 2.0), with_entry(v, later, 2.0), mask);
    if (!same_values(slice_rows(out, 0, i + 1), slice_rows(base, 0, i + 1)))
      return fail(cat("rows up to ", i, " see row ", i + 1));
  }
  return pass();
}

// ---- rope --------------------------------------------------------------------

CheckResult rope_relative() {
  Rng rng(18);
  const std::size_t d = 8;
  const RopeFrequencies freqs = RopeFrequencies::make(d);
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const Tensor q = Tensor::randn({1, d}, rng), k = Tensor::randn({1, d}, rng);
    const std::size_t p1 = rng.next_u64() % 64, p2 = rng.next_u64() % 64, s = rng.next_u64() % 64;
    auto inner = [&](std::size_t a, std::size_t b) {
      const std::vector<std::size_t> pa{a}, pb{b};
      return kernels::dot(apply_rope(q, pa, freqs).data(), apply_rope(k, pb, freqs).data());
    };
    const double lhs = inner(p1, p2), rhs = inner(p1 + s, p2 + s);
    if (std::abs(lhs - rhs) > 1e-9) return fail(cat("shift ", s, " changes the score by ", std::abs(lhs - rhs)));
  }
  return pass();
}

CheckResult rope_norm() {
  Rng rng(19);
  const std::size_t n = 16, d = 8;
  const Tensor x = Tensor::randn({n, d}, rng);
  const std::vector<std::size_t> pos = grid_positions(n);
  const Tensor y = apply_rope(x, pos, RopeFrequencies::make(d));
  for (std::size_t i = 0; i < n * d; i += 2) {
    const double a = std::hypot(x.data()[i], x.data()[i + 1]), b = std::hypot(y.data()[i], y.data()[i + 1]);
    if (std::abs(a - b) > 1e-12) return fail(cat("pair norm changed at ", i));
  }
  return pass();
}

// ---- lora --------------------------------------------------------------------

CheckResult lora_isolation() {
  Rng rng(20);
  const std::size_t d = 8;
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const BranchLayout layout = small_layout(rng);
    const Tensor z = Tensor::randn({layout.total(), d}, rng);
    const ProjectionWeights w = ProjectionWeights::init(d, rng);
    ConditionAdapterSet zero = ConditionAdapterSet::init(d, 2, rng);
    ConditionAdapterSet live = ConditionAdapterSet::init(d, 2, rng);
    for (Condition c : kConditions)
      for (Slot s : kSlots) live.adapter(c, s).b = Tensor::randn({d, 2}, rng);
    const QKV a = project_branches(z, layout, w, zero), b = project_branches(z, layout, w, live);
    const std::size_t img = layout.image_tokens();
    if (!same_values(slice_rows(a.q, 0, img), slice_rows(b.q, 0, img)) ||
        !same_values(slice_rows(a.k, 0, img), slice_rows(b.k, 0, img)) ||
        !same_values(slice_rows(a.v, 0, img), slice_rows(b.v, 0, img)))
      return fail(cat("image rows moved in trial ", trial));
    if (same_values(a.q, b.q)) return fail("adapters had no effect on condition rows");
  }
  return pass();
}

CheckResult lora_defaults() {
  Rng rng(21);
  const ConditionAdapterSet set = ConditionAdapterSet::init(8, 2, rng);
  if (set.strength(Condition::depth) != 1.0 || set.strength(Condition::normal) != 1.2 ||
      set.strength(Condition::lighting) != 0.8)
    return fail(cat("strengths ", set.strength(Condition::depth), "/", set.strength(Condition::normal), "/",
                    set.strength(Condition::lighting)));
  return pass();
}

CheckResult lora_linearity() {
  Rng rng(22);
  const std::size_t d = 8;
  const Tensor z = Tensor::randn({5, d}, rng);
  for (double s : {0.8, 1.0, 1.2, 0.37}) {
    LoraAdapter ad = LoraAdapter::init(d, 2, s, rng);
    ad.b = Tensor::randn({d, 2}, rng);
    LoraAdapter doubled = ad;
    doubled.strength = 2.0 * s;
    if (!same_values(lora_delta(z, doubled), scale(lora_delta(z, ad), 2.0)))
      return fail(cat("delta(2s) != 2 delta(s) at s=", s));
  }
  return pass();
}

// ---- flow --------------------------------------------------------------------

CheckResult flow_endpoints() {
  Rng rng(23);
  const Tensor x0 = Tensor::randn({4, 3}, rng), eps = Tensor::randn({4, 3}, rng);
  if (!same_values(flow_path(x0, eps, 0.0), x0)) return fail("t=0 is not x0");
  if (!same_values(flow_path(x0, eps, 1.0), eps)) return fail("t=1 is not eps");
  return pass();
}

CheckResult flow_oracle_recovery() {
  Rng rng(24);
  const Tensor x0 = Tensor::randn({4, 3}, rng);
  for (std::size_t steps : {1, 5, 25}) {
    const Tensor noise = initial_noise(x0.shape(), 99);
    const Tensor velocity = sub(noise, x0);
    const Tensor out = integrate_euler([&](const Tensor&, double) { return velocity; }, noise, steps);
    const double err = max_abs_diff(out, x0);
    if (err > 1e-10) return fail(cat(steps, " steps: error ", err));
  }
  return pass();
}

// ---- model -------------------------------------------------------------------

CheckResult model_timestep_invariance() {
  ModelConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  const ModelState state = generic_state(cfg, 25);
  const ConditionPatches conds = random_conditions(cfg, 25);
  Rng rng(25);
  const Tensor noise = Tensor::randn(noise_shape(state), rng);
  const TokenSequence seq = tokenize(state, noise, conds);
  const std::size_t off = seq.layout.image_tokens();
  ForwardTrace ref;
  forward(state, seq, 0.0, &ref);
  for (double t : {0.37, 1.0}) {
    ForwardTrace tr;
    forward(state, seq, t, &tr);
    for (std::size_t b = 0; b < ref.keys.size(); ++b) {
      const std::size_t len = seq.layout.cond_tokens();
      if (!same_values(slice_rows(tr.keys[b], off, len), slice_rows(ref.keys[b], off, len)) ||
          !same_values(slice_rows(tr.values[b], off, len), slice_rows(ref.values[b], off, len)))
        return fail(cat("condition K/V of block ", b, " change between t=0 and t=", t));
    }
  }
  return pass();
}

CheckResult model_gradcheck() {
  ModelConfig cfg;
  cfg.d_model = 4;
  cfg.n_blocks = 1;
  cfg.lora_rank = 2;
  cfg.grid_h = cfg.grid_w = 2;
  ModelState state = generic_state(cfg, 26);
  const ConditionPatches conds = random_conditions(cfg, 26);
  Rng rng(26);
  const Tensor x0 = Tensor::randn(noise_shape(state), rng, 0.5);
  const FlowSample sample = draw_flow_sample(x0, rng);

  double worst = 0.0;
  std::string where;
  for (ParamRef& p : state.parameters()) {
    const Tensor original = *p.tensor;
    auto loss_with = [&](const Tensor& value) {
      *p.tensor = value;
      const double l = cfm_loss_at(uncached_velocity(state, conds), sample).item();
      *p.tensor = original;
      return l;
    };
    *p.tensor = original.detach(true);
    const Tensor loss = cfm_loss_at(uncached_velocity(state, conds), sample);
    loss.backward();
    const std::vector<double> analytic = p.tensor->grad();
    *p.tensor = original;
    const Tensor numeric = finite_diff_grad(loss_with, original, 1e-4);
    const double err = relative_error(analytic, numeric.data(), 1e-8);
    if (err > worst) {
      worst = err;
      where = p.name;
    }
  }
  if (worst >= 1e-3) return fail(cat("relative error ", worst, " in ", where));
  return pass();
}

CheckResult model_frozen_base() {
  ModelConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  // From a fresh init the zero head passes no gradient back to the adapters,
  // so start from generic weights as a trained base would provide.
  ModelState state = generic_state(cfg, 27);
  const ModelState before = state.clone();
  const ToyDataset ds = make_synthetic_dataset(2, 4, 4, 27);
  TrainOptions opts;
  opts.steps = 5;
  opts.learning_rate = 1e-3;
  opts.frozen_base = true;
  train(state, ds, opts);
  ModelState copy = before.clone();
  const std::vector<ParamRef> now = state.parameters(), then = copy.parameters();
  bool adapters_moved = false;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const bool same = same_values(*now[i].tensor, *then[i].tensor);
    if (!now[i].adapter && !same) return fail(now[i].name + " changed under frozen_base");
    adapters_moved |= now[i].adapter && !same;
  }
  if (!adapters_moved) return fail("no adapter was updated");
  return pass();
}

// ---- kvcache -----------------------------------------------------------------

CheckResult kvcache_equivalence() {
  ModelConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ModelState state = generic_state(cfg, 100 + seed);
    const ConditionPatches conds = random_conditions(cfg, 100 + seed);
    for (std::size_t steps : {1, 5, 25}) {
      const FlowConfig fc{steps, seed};
      KVCacheStore store;
      const Tensor cached = sample_cached(state, conds, fc, &store);
      const Tensor plain = sample_uncached(state, conds, fc);
      const double diff = max_abs_diff(cached, plain);
      if (diff >= 1e-10) return fail(cat("seed ", seed, ", ", steps, " steps: diff ", diff));
      for (Condition c : kConditions)
        if (store.computations(c) != 1)
          return fail(cat(condition_name(c), " computed ", store.computations(c), " times"));
    }
  }
  return pass();
}

CheckResult kvcache_slices() {
  ModelConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  const ModelState state = generic_state(cfg, 28);
  const ConditionPatches conds = random_conditions(cfg, 28);
  Rng rng(28);
  const TokenSequence seq = tokenize(state, Tensor::randn(noise_shape(state), rng), conds);
  ForwardTrace trace;
  forward(state, seq, 0.5, &trace);
  const KVCacheStore store = precompute_condition_kv(state, conds);
  for (std::size_t k = 0; k < kConditionCount; ++k)
    for (std::size_t b = 0; b < state.blocks.size(); ++b) {
      const std::size_t off = seq.layout.cond_offset(k), len = seq.layout.cond_lengths[k];
      if (!same_values(store.get(kConditions[k]).keys[b], slice_rows(trace.keys[b], off, len)) ||
          !same_values(store.get(kConditions[k]).values[b], slice_rows(trace.values[b], off, len)))
        return fail(cat("cached ", condition_name(kConditions[k]), " K/V differ in block ", b));
    }
  return pass();
}

CheckResult kvcache_monotone_cost() {
  ModelConfig cfg;
  cfg.grid_h = cfg.grid_w = 4;
  const ModelState state = generic_state(cfg, 29);
  const ConditionPatches conds = random_conditions(cfg, 29);
  const KVCacheStore store = precompute_condition_kv(state, conds);
  Rng rng(29);
  const Tensor x = Tensor::randn(noise_shape(state), rng);
  NoGradGuard no_grad;
  kernels::reset_multiply_count();
  forward(state, tokenize(state, x, conds), 0.5);
  const std::uint64_t full = kernels::multiply_count();
  kernels::reset_multiply_count();
  cached_forward(state, x, conds, store, 0.5);
  const std::uint64_t cached = kernels::multiply_count();
  if (!(cached < full)) return fail(cat("cached step ", cached, " multiplies vs ", full));
  return pass();
}

// ---- ensemble ----------------------------------------------------------------

CheckResult ensemble_depth_examples() {
  const Tensor ramp({1, 2}, {0.0, 1.0});
  if (depth_objective({ramp, ramp}, AffineParams::identity(2), 0.1) != 0.0) return fail("identical ramps not 0");
  const AffineParams collapse{{0.0, 0.0}, {0.0, 0.0}};
  if (std::abs(depth_objective({ramp, ramp}, collapse, 0.1) - 0.1) > 1e-15) return fail("collapse is not lambda");
  const Tensor shifted({1, 2}, {0.5, 1.5});
  if (depth_objective({ramp, shifted}, {{1.0, 1.0}, {0.0, -0.5}}, 0.0) != 0.0) return fail("aligned pair not 0");
  return pass();
}

CheckResult ensemble_depth_gauge() {
  Rng rng(30);
  const Tensor base = Tensor::uniform({4, 4}, rng, 0.0, 1.0);
  const DepthPredictionSet preds{base, Tensor::uniform({4, 4}, rng, 0.0, 1.0), Tensor::uniform({4, 4}, rng, 0.0, 1.0)};
  const AffineParams p{{1.1, 0.9, 1.3}, {0.05, -0.1, 0.2}};
  AffineParams shifted = p, joint = p;
  for (std::size_t i = 0; i < 3; ++i) {
    shifted.offset[i] += 0.3;
    joint.scale[i] *= 2.0;
    joint.offset[i] = 2.0 * joint.offset[i] + 0.3;
  }
  const double pw = pairwise_term(preds, p);
  if (std::abs(pairwise_term(preds, shifted) - pw) > 1e-12) return fail("common offset changes the pairwise term");
  if (std::abs(pairwise_term(preds, joint) - 2.0 * pw) > 1e-12) return fail("common scale is not homogeneous");
  if (depth_objective(preds, joint, 0.1) == depth_objective(preds, p, 0.1)) return fail("range term ignores the gauge");
  return pass();
}

CheckResult ensemble_merge() {
  const Tensor a({1, 1}, {0.0}), b({1, 1}, {10.0}), c({1, 1}, {0.5});
  if (merge_depth({a, b, c}, AffineParams::identity(3)).item() != 0.5) return fail("odd median");
  const Tensor x({1, 1}, {0.2}), y({1, 1}, {0.4});
  if (std::abs(merge_depth({x, y}, AffineParams::identity(2)).item() - 0.3) > 1e-15) return fail("even median");
  return pass();
}

CheckResult ensemble_median_robustness() {
  Rng rng(31);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    DepthPredictionSet preds;
    for (int i = 0; i < 5; ++i) preds.push_back(Tensor::uniform({3, 3}, rng, 0.0, 1.0));
    const AffineParams id = AffineParams::identity(5);
    const Tensor before = merge_depth(preds, id);
    DepthPredictionSet changed = preds;
    const std::size_t victim = rng.next_u64() % 5;
    changed[victim] = Tensor::uniform({3, 3}, rng, -50.0, 50.0);
    const Tensor after = merge_depth(changed, id);
    // Whatever the outlier, the merged value stays between the two central
    // values of the untouched maps.
    for (std::size_t px = 0; px < 9; ++px) {
      std::vector<double> others;
      for (std::size_t i = 0; i < 5; ++i)
        if (i != victim) others.push_back(preds[i].data()[px]);
      std::sort(others.begin(), others.end());
      const double v = after.data()[px];
      if (v < others[1] || v > others[2]) return fail(cat("outlier dragged the median out of range at pixel ", px));
      if (before.data()[px] < others[1] || before.data()[px] > others[2]) return fail("median outside central pair");
    }
  }
  return pass();
}

CheckResult ensemble_normals_example() {
  const double h = std::sqrt(0.5);
  const NormalPredictionSet preds{Tensor({1, 1, 3}, {1.0, 0.0, 0.0}), Tensor({1, 1, 3}, {0.0, 1.0, 0.0}),
                                  Tensor({1, 1, 3}, {h, h, 0.0})};
  const Tensor out = ensemble_normals(preds);
  if (!same_values(out, preds[2])) return fail("did not select the diagonal vector");
  return pass();
}

CheckResult ensemble_normals_selection() {
  Rng rng(32);
  NormalPredictionSet preds;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> v(6 * 6 * 3);
    for (std::size_t p = 0; p < 36; ++p) {
      double n[3] = {rng.normal(), rng.normal(), std::abs(rng.normal()) + 0.2};
      const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
      for (int c = 0; c < 3; ++c) v[p * 3 + c] = n[c] / len;
    }
    preds.push_back(Tensor({6, 6, 3}, std::move(v)));
  }
  const Tensor out = ensemble_normals(preds);
  for (std::size_t p = 0; p < 36; ++p) {
    bool member = false;
    for (const Tensor& pr : preds) member |= std::equal(pr.data().begin() + p * 3, pr.data().begin() + p * 3 + 3,
                                                        out.data().begin() + p * 3);
    if (!member) return fail(cat("pixel ", p, " is not one of the inputs"));
  }
  return pass();
}

CheckResult ensemble_lighting_roundtrip() {
  Rng rng(33);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const Tensor image = Tensor::uniform({4, 4, 3}, rng, 0.0, 1.0), albedo = Tensor::uniform({4, 4, 3}, rng, 0.0, 1.0);
    const Tensor shading = Tensor::uniform({4, 4}, rng, 0.0, 2.0);
    const double err = max_abs_diff(reconstruct(albedo, shading, lighting_residual(image, albedo, shading)), image);
    if (err >= 1e-15) return fail(cat("round trip error ", err));
  }
  return pass();
}

// ---- config ------------------------------------------------------------------

CheckResult config_help() {
  const std::string help = config::keys_help();
  for (const config::KeySpec& k : config::key_specs()) {
    const std::string needle = std::string(k.name) + " (";
    const std::size_t at = help.find("  " + needle);
    if (at == std::string::npos) return fail(cat("help omits ", k.name));
    const std::size_t eol = help.find('\n', at);
    if (help.substr(at, eol - at).find("default " + std::string(k.default_value)) == std::string::npos)
      return fail(cat("help omits the default of ", k.name));
  }
  return pass();
}

std::vector<Check> build_registry() {
  std::vector<Check> all;
  auto add = [&](std::string name, std::string summary, std::function<CheckResult()> run) {
    const std::string group = name.substr(0, name.find('.'));
    all.push_back({std::move(name), group, std::move(summary), std::move(run)});
  };
  add("tensor.gradcheck", "reverse-mode gradients match central differences", tensor_gradcheck);
  add("tensor.transpose", "transpose is an involution", tensor_transpose);
  add("kernels.equivalence", "SIMD kernels agree with the scalar reference", kernels_equivalence);
  add("kernels.row_independence", "matmul rows do not depend on neighbouring rows", kernels_row_independence);
  add("scma.structure", "SCMA mask matches block membership for all layouts in {0..4}^5",
      [] { return scma_structure(build_scma_mask); });
  add("scma.isolation", "condition blocks never see other condition blocks", scma_isolation);
  add("scma.aggregation", "noise rows depend on every block", scma_aggregation);
  add("scma.dump", "mask dump parses back", scma_dump_roundtrip);
  add("causal.structure", "causal mask is lower triangular", causal_structure);
  add("causal.future", "causal rows ignore later K/V", causal_future_invariance);
  add("rope.relative", "RoPE scores depend only on position differences", rope_relative);
  add("rope.norm", "RoPE preserves pair norms", rope_norm);
  add("lora.isolation", "adapters leave noise/material Q/K/V unchanged", lora_isolation);
  add("lora.defaults", "default strengths are 1.0 / 1.2 / 0.8", lora_defaults);
  add("lora.linearity", "delta(2s) == 2 delta(s)", lora_linearity);
  add("flow.endpoints", "flow_path hits x0 and eps exactly", flow_endpoints);
  add("flow.oracle", "Euler with the exact velocity recovers x0", flow_oracle_recovery);
  add("model.timestep_invariance", "condition K/V are identical for every t", model_timestep_invariance);
  add("model.gradcheck", "full-model loss gradients match central differences", model_gradcheck);
  add("model.frozen_base", "frozen_base training leaves base weights bitwise unchanged", model_frozen_base);
  add("kvcache.equivalence", "cached sampling equals uncached sampling", kvcache_equivalence);
  add("kvcache.slices", "cache holds the uncached condition K/V", kvcache_slices);
  add("kvcache.cost", "a cached step does fewer multiplies", kvcache_monotone_cost);
  add("ensemble.depth_examples", "depth objective on hand-computed cases", ensemble_depth_examples);
  add("ensemble.depth_gauge", "pairwise term under a common affine", ensemble_depth_gauge);
  add("ensemble.merge", "median merge conventions", ensemble_merge);
  add("ensemble.median_robustness", "one outlier cannot drag the median past the others", ensemble_median_robustness);
  add("ensemble.normals_example", "three-vector normals example", ensemble_normals_example);
  add("ensemble.normals_selection", "normals output is always an input vector", ensemble_normals_selection);
  add("ensemble.lighting", "lighting residual round trip", ensemble_lighting_roundtrip);
  add("config.help", "help text lists every key and default", config_help);
  return all;
}

}  // namespace

CheckResult scma_structure(const MaskBuilder& build, std::size_t max_block) {
  std::array<std::size_t, 5> sizes{};
  const std::size_t base = max_block + 1;
  std::size_t layouts = 1;
  for (int i = 0; i < 5; ++i) layouts *= base;
  for (std::size_t code = 0; code < layouts; ++code) {
    std::size_t rest = code;
    for (std::size_t& s : sizes) {
      s = rest % base;
      rest /= base;
    }
    const BranchLayout layout{sizes[0], sizes[1], {sizes[2], sizes[3], sizes[4]}};
    std::vector<std::size_t> owner;
    for (std::size_t b = 0; b < 5; ++b) owner.insert(owner.end(), sizes[b], b);
    const AttentionMask mask = build(layout);
    const std::size_t n = owner.size();
    if (mask.rows() != n || mask.cols() != n) return fail(cat("layout ", to_string(layout), ": wrong mask size"));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const bool expected = owner[i] < 2 || owner[i] == owner[j];
        const double entry = mask(i, j);
        if (entry != 0.0 && entry != AttentionMask::kBlocked)
          return fail(cat("layout ", to_string(layout), ": entry (", i, ",", j, ") is neither 0 nor -inf"));
        if ((entry == 0.0) != expected)
          return fail(cat("layout ", to_string(layout), ": entry (", i, ",", j, ") should be ",
                          expected ? "open" : "blocked"));
      }
  }
  return pass();
}

const std::vector<Check>& registry() {
  static const std::vector<Check> all = build_registry();
  return all;
}

std::vector<const Check*> select(std::string_view group) {
  std::vector<const Check*> out;
  for (const Check& c : registry())
    if (group.empty() || c.group == group || c.name == group) out.push_back(&c);
  return out;
}

}  // namespace shaderflow::checks
