// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "shaderflow/tensor.hpp"

namespace shaderflow {

// Token counts of the blocks of a joint sequence, always ordered
// [noise, material, cond_0, ..., cond_{m-1}].
struct BranchLayout {
  std::size_t n_noise = 0;
  std::size_t n_material = 0;
  std::vector<std::size_t> cond_lengths;

  std::size_t total() const;
  std::size_t image_tokens() const { return n_noise + n_material; }
  std::size_t cond_tokens() const;
  std::size_t cond_offset(std::size_t cond) const;

  // Block of token i: 0 noise, 1 material, 2 + k condition k.
  std::size_t block_of(std::size_t token) const;
  std::size_t block_count() const { return 2 + cond_lengths.size(); }

  bool operator==(const BranchLayout&) const = default;
};

std::string to_string(const BranchLayout& layout);

// rows x cols additive mask with entries exactly 0 or -infinity.
class AttentionMask {
 public:
  static constexpr double kBlocked = -std::numeric_limits<double>::infinity();

  AttentionMask() = default;
  // All entries 0.
  AttentionMask(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return entries_.empty(); }
  bool allows(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j] == 0.0; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
  void block(std::size_t i, std::size_t j) { entries_[i * cols_ + j] = kBlocked; }
  void allow(std::size_t i, std::size_t j) { entries_[i * cols_ + j] = 0.0; }
  std::span<const double> entries() const { return entries_; }
  std::size_t allowed_count() const;

  // '0' for allowed and '-' for blocked, one row per line.
  std::string dump() const;
  static AttentionMask parse_dump(std::string_view text);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

AttentionMask build_full_mask(std::size_t n);
AttentionMask build_causal_mask(std::size_t n);
// Noise and material rows attend to every token; a condition row attends only
// to tokens of its own condition block.
AttentionMask build_scma_mask(const BranchLayout& layout);

struct RopeFrequencies {
  std::size_t dim = 0;
  double base = 10000.0;
  // theta[j] = base^(-2j/dim), j < dim/2
  std::vector<double> theta;

  static RopeFrequencies make(std::size_t dim, double base = 10000.0);
};

// Rotates every pair (x_2j, x_2j+1) of row i by positions[i] * theta_j. The
// token width may be a multiple of freqs.dim (one rotation per head).
Tensor apply_rope(const Tensor& tokens, std::span<const std::size_t> positions,
                  const RopeFrequencies& freqs);

// softmax(Q K^T / sqrt(d_head) + mask) V, per head. Q is [nq x d], K and V
// [nk x d]; the mask is nq x nk or empty for "no masking".
Tensor mma(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
           std::size_t n_heads = 1);

}  // namespace shaderflow
