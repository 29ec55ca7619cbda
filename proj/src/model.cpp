// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/model.hpp"

#include <cmath>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (d_model == 0 || d_model % 2 != 0) fail("d_model must be even and positive");
  if (n_blocks == 0) fail("n_blocks must be at least 1");
  if (n_heads == 0 || d_model % n_heads != 0) fail("n_heads must divide d_model");
  if (head_dim() % 2 != 0) fail("d_model / n_heads must be even for RoPE");
  if (lora_rank < 1 || 2 * lora_rank > d_model) fail("lora_rank must satisfy 1 <= r <= d_model / 2");
  if (patch_size == 0) fail("patch_size must be positive");
  if (grid_h == 0 || grid_w == 0) fail("grid dimensions must be positive");
  if (grid_h % patch_size != 0 || grid_w % patch_size != 0) fail("grid must be divisible by patch_size");
  if (mlp_mult == 0) fail("mlp_mult must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(rope_base > 1.0)) fail("rope_base must exceed 1");
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::noise: return "noise";
    case Role::material: return "material";
    case Role::depth: return "depth";
    case Role::normal: return "normal";
    case Role::lighting: return "lighting";
  }
  return "?";
}

std::size_t role_channels(Role r) {
  switch (r) {
    case Role::depth:
    case Role::lighting: return 1;
    default: return 3;
  }
}

Role condition_role(Condition c) {
  switch (c) {
    case Condition::depth: return Role::depth;
    case Condition::normal: return Role::normal;
    case Condition::lighting: return Role::lighting;
  }
  return Role::depth;
}

LatentImage LatentImage::zeros(Role role, std::size_t height, std::size_t width) {
  const std::size_t c = role_channels(role);
  return LatentImage{role, c, height, width, std::vector<double>(c * height * width, 0.0)};
}

void LatentImage::validate() const {
  const std::string who(role_name(role));
  if (channels != role_channels(role))
    throw DimensionError(who + ": expected " + std::to_string(role_channels(role)) + " channels, got " +
                         std::to_string(channels));
  if (data.size() != channels * height * width) throw DimensionError(who + ": data size does not match dims");
  for (double v : data)
    if (!std::isfinite(v)) throw NumericError(who + ": non-finite sample");
  if (role == Role::depth) {
    for (double v : data)
      if (v < 0.0 || v > 1.0) throw ConfigError("depth values must lie in [0, 1]");
  } else if (role == Role::lighting) {
    for (double v : data)
      if (v < 0.0) throw ConfigError("lighting values must be >= 0");
  } else if (role == Role::normal) {
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double n = std::sqrt(at(0, y, x) * at(0, y, x) + at(1, y, x) * at(1, y, x) + at(2, y, x) * at(2, y, x));
        if (std::abs(n - 1.0) > 1e-6)
          throw ConfigError("normal at (" + std::to_string(y) + ", " + std::to_string(x) + ") is not unit length");
      }
  }
}

Tensor patchify(const LatentImage& image, std::size_t p) {
  if (p == 0 || image.height % p != 0 || image.width % p != 0)
    throw DimensionError(std::string(role_name(image.role)) + ": grid " + std::to_string(image.height) + "x" +
                         std::to_string(image.width) + " not divisible by patch " + std::to_string(p));
  const std::size_t gh = image.height / p, gw = image.width / p, feat = image.channels * p * p;
  std::vector<double> out(gh * gw * feat);
  for (std::size_t ty = 0; ty < gh; ++ty)
    for (std::size_t tx = 0; tx < gw; ++tx) {
      double* row = out.data() + (ty * gw + tx) * feat;
      for (std::size_t c = 0; c < image.channels; ++c)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx) row[(c * p + dy) * p + dx] = image.at(c, ty * p + dy, tx * p + dx);
    }
  return Tensor({gh * gw, feat}, std::move(out));
}

LatentImage unpatchify(const Tensor& tokens, Role role, std::size_t height, std::size_t width, std::size_t p) {
  LatentImage image = LatentImage::zeros(role, height, width);
  const std::size_t gh = height / p, gw = width / p, feat = image.channels * p * p;
  if (tokens.rows() != gh * gw || tokens.cols() != feat)
    throw DimensionError("unpatchify: tokens " + shape_string(tokens.shape()) + " do not tile " +
                         std::to_string(height) + "x" + std::to_string(width));
  for (std::size_t ty = 0; ty < gh; ++ty)
    for (std::size_t tx = 0; tx < gw; ++tx)
      for (std::size_t c = 0; c < image.channels; ++c)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx)
            image.at(c, ty * p + dy, tx * p + dx) = tokens.at(ty * gw + tx, (c * p + dy) * p + dx);
  return image;
}

ConditionPatches patchify_conditions(const ConditionImages& images, const ModelConfig& cfg) {
  auto checked = [&](const LatentImage& img, Role role) {
    if (img.role != role || img.height != cfg.grid_h || img.width != cfg.grid_w)
      throw DimensionError(std::string(role_name(role)) + ": expected a " + std::to_string(cfg.grid_h) + "x" +
                           std::to_string(cfg.grid_w) + " map, got " + std::string(role_name(img.role)) + " " +
                           std::to_string(img.height) + "x" + std::to_string(img.width));
    img.validate();
    return patchify(img, cfg.patch_size);
  };
  ConditionPatches out;
  out.material = checked(images.material, Role::material);
  for (Condition c : kConditions)
    if (const auto& img = images.cond(c)) out.conds[static_cast<std::size_t>(c)] = checked(*img, condition_role(c));
  return out;
}

ConditionPatches without(ConditionPatches patches, Condition c) {
  patches.conds[static_cast<std::size_t>(c)].reset();
  return patches;
}

namespace {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform(std::move(shape), rng, -bound, bound, true);
}

}  // namespace

ModelState ModelState::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelState s;
  s.cfg = cfg;
  const std::size_t d = cfg.d_model, hidden = cfg.mlp_mult * cfg.d_model;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    const std::size_t fan_in = s.patch_dim(static_cast<Role>(r));
    s.embed_w[r] = init_uniform({fan_in, d}, fan_in, rng);
    s.embed_b[r] = Tensor::zeros({d}, true);
  }
  s.time_w = init_uniform({d, d}, d, rng);
  s.time_b = Tensor::zeros({d}, true);
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    BlockParams block;
    block.proj = ProjectionWeights::init(d, rng);
    block.w_out = init_uniform({d, d}, d, rng);
    block.w1 = init_uniform({d, hidden}, d, rng);
    block.b1 = Tensor::zeros({hidden}, true);
    block.w2 = init_uniform({hidden, d}, hidden, rng);
    block.b2 = Tensor::zeros({d}, true);
    block.adapters = ConditionAdapterSet::init(d, cfg.lora_rank, rng);
    s.blocks.push_back(std::move(block));
  }
  s.head_w = Tensor::zeros({d, s.patch_dim(Role::noise)}, true);
  s.head_b = Tensor::zeros({s.patch_dim(Role::noise)}, true);
  return s;
}

std::vector<ParamRef> ModelState::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    const std::string role(role_name(static_cast<Role>(r)));
    out.push_back({"embed." + role + ".w", &embed_w[r], false});
    out.push_back({"embed." + role + ".b", &embed_b[r], false});
  }
  out.push_back({"time.w", &time_w, false});
  out.push_back({"time.b", &time_b, false});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string prefix = "blocks." + std::to_string(b) + ".";
    BlockParams& blk = blocks[b];
    out.push_back({prefix + "w_q", &blk.proj.w_q, false});
    out.push_back({prefix + "w_k", &blk.proj.w_k, false});
    out.push_back({prefix + "w_v", &blk.proj.w_v, false});
    out.push_back({prefix + "w_out", &blk.w_out, false});
    out.push_back({prefix + "mlp.w1", &blk.w1, false});
    out.push_back({prefix + "mlp.b1", &blk.b1, false});
    out.push_back({prefix + "mlp.w2", &blk.w2, false});
    out.push_back({prefix + "mlp.b2", &blk.b2, false});
    for (Condition c : kConditions)
      for (Slot slot : kSlots) {
        LoraAdapter& ad = blk.adapters.adapter(c, slot);
        const std::string name = prefix + "lora." + std::string(condition_name(c)) + "." + std::string(slot_name(slot));
        out.push_back({name + ".a", &ad.a, true});
        out.push_back({name + ".b", &ad.b, true});
      }
  }
  out.push_back({"head.w", &head_w, false});
  out.push_back({"head.b", &head_b, false});
  return out;
}

ModelState ModelState::clone() const {
  ModelState copy = *this;
  for (ParamRef& p : copy.parameters()) *p.tensor = p.tensor->detach(true);
  return copy;
}

ModelState with_strength(ModelState state, Condition c, double s) {
  for (BlockParams& b : state.blocks) b.adapters = set_strength(b.adapters, c, s);
  return state;
}

std::vector<std::size_t> grid_positions(std::size_t tokens) {
  std::vector<std::size_t> pos(tokens);
  for (std::size_t i = 0; i < tokens; ++i) pos[i] = i;
  return pos;
}

Tensor embed_role(const ModelState& state, Role role, const Tensor& patches) {
  const std::size_t r = static_cast<std::size_t>(role);
  if (patches.cols() != state.patch_dim(role))
    throw DimensionError(std::string(role_name(role)) + ": patches " + shape_string(patches.shape()) +
                         " do not match patch width " + std::to_string(state.patch_dim(role)));
  return add_row(matmul(patches, state.embed_w[r]), state.embed_b[r]);
}

TokenSequence tokenize(const ModelState& state, const Tensor& noise_patches, const ConditionPatches& conds) {
  const std::size_t per_map = state.cfg.tokens_per_map();
  auto check_tokens = [&](const Tensor& t, Role role) {
    if (t.rows() != per_map)
      throw DimensionError(std::string(role_name(role)) + ": " + std::to_string(t.rows()) + " tokens, grid has " +
                           std::to_string(per_map));
  };
  check_tokens(noise_patches, Role::noise);
  check_tokens(conds.material, Role::material);

  TokenSequence seq;
  std::vector<Tensor> parts{embed_role(state, Role::noise, noise_patches),
                            embed_role(state, Role::material, conds.material)};
  seq.layout.n_noise = per_map;
  seq.layout.n_material = per_map;
  for (Condition c : kConditions) {
    const auto& patches = conds.cond(c);
    if (patches) {
      check_tokens(*patches, condition_role(c));
      parts.push_back(embed_role(state, condition_role(c), *patches));
    }
    seq.layout.cond_lengths.push_back(patches ? per_map : 0);
  }
  seq.z = concat_rows(parts);
  const std::vector<std::size_t> grid = grid_positions(per_map);
  for (std::size_t i = 0; i < parts.size(); ++i) seq.positions.insert(seq.positions.end(), grid.begin(), grid.end());
  return seq;
}

Tensor time_embedding(const ModelState& state, double t) {
  const std::size_t d = state.cfg.d_model, half = d / 2;
  std::vector<double> feats(d);
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    feats[i] = std::sin(1000.0 * t * freq);
    feats[half + i] = std::cos(1000.0 * t * freq);
  }
  return add_row(matmul_bt(Tensor({1, d}, std::move(feats)), state.time_w), state.time_b);
}

Tensor attention_output(const BlockParams& block, const Tensor& attended) {
  return matmul_bt(attended, block.w_out);
}

Tensor mlp_residual(const BlockParams& block, const Tensor& h, double ln_eps) {
  Tensor m = layer_norm(h, ln_eps);
  m = gelu(add_row(matmul(m, block.w1), block.b1));
  m = add_row(matmul(m, block.w2), block.b2);
  return add(h, m);
}

Tensor velocity_head(const ModelState& state, const Tensor& noise_hidden) {
  return add_row(matmul(layer_norm(noise_hidden, state.cfg.ln_eps), state.head_w), state.head_b);
}

Tensor forward(const ModelState& state, const TokenSequence& tokens, double t, ForwardTrace* trace) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("forward: t = " + std::to_string(t) + " outside [0, 1]");
  const BranchLayout& layout = tokens.layout;
  if (tokens.z.rows() != layout.total() || tokens.positions.size() != layout.total())
    throw DimensionError("forward: token sequence does not match layout " + to_string(layout));
  if (layout.n_noise == 0) throw DimensionError("forward: empty noise block");
  const ModelConfig& cfg = state.cfg;

  Tensor noise = add_row(slice_rows(tokens.z, 0, layout.n_noise), time_embedding(state, t));
  Tensor h = noise;
  if (layout.total() > layout.n_noise) {
    const std::vector<Tensor> parts{noise, slice_rows(tokens.z, layout.n_noise, layout.total() - layout.n_noise)};
    h = concat_rows(parts);
  }
  const AttentionMask mask = build_scma_mask(layout);
  const RopeFrequencies freqs = RopeFrequencies::make(cfg.head_dim(), cfg.rope_base);
  if (trace) {
    trace->keys.clear();
    trace->values.clear();
  }
  for (const BlockParams& block : state.blocks) {
    Tensor a = layer_norm(h, cfg.ln_eps);
    QKV qkv = project_branches(a, layout, block.proj, block.adapters);
    Tensor q = apply_rope(qkv.q, tokens.positions, freqs);
    Tensor k = apply_rope(qkv.k, tokens.positions, freqs);
    if (trace) {
      trace->keys.push_back(k);
      trace->values.push_back(qkv.v);
    }
    h = add(h, attention_output(block, mma(q, k, qkv.v, mask, cfg.n_heads)));
    h = mlp_residual(block, h, cfg.ln_eps);
  }
  if (trace) trace->hidden = h;
  return velocity_head(state, slice_rows(h, 0, layout.n_noise));
}

Shape noise_shape(const ModelState& state) {
  return {state.cfg.tokens_per_map(), state.patch_dim(Role::noise)};
}

VelocityModel uncached_velocity(const ModelState& state, const ConditionPatches& conds) {
  return [&state, &conds](const Tensor& xt, double t) { return forward(state, tokenize(state, xt, conds), t); };
}

Tensor sample_uncached(const ModelState& state, const ConditionPatches& conds, const FlowConfig& cfg) {
  NoGradGuard no_grad;
  return sample_euler(uncached_velocity(state, conds), noise_shape(state), cfg);
}

}  // namespace shaderflow
