// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/attention.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "shaderflow/errors.hpp"

namespace shaderflow {

std::size_t BranchLayout::total() const { return image_tokens() + cond_tokens(); }

std::size_t BranchLayout::cond_tokens() const {
  return std::accumulate(cond_lengths.begin(), cond_lengths.end(), std::size_t{0});
}

std::size_t BranchLayout::cond_offset(std::size_t cond) const {
  std::size_t offset = image_tokens();
  for (std::size_t k = 0; k < cond; ++k) offset += cond_lengths.at(k);
  return offset;
}

std::size_t BranchLayout::block_of(std::size_t token) const {
  if (token < n_noise) return 0;
  if (token < image_tokens()) return 1;
  std::size_t end = image_tokens();
  for (std::size_t k = 0; k < cond_lengths.size(); ++k) {
    end += cond_lengths[k];
    if (token < end) return 2 + k;
  }
  throw DimensionError("token " + std::to_string(token) + " outside layout " + to_string(*this));
}

std::string to_string(const BranchLayout& layout) {
  std::ostringstream os;
  os << "(noise=" << layout.n_noise << ", material=" << layout.n_material << ", conds=[";
  for (std::size_t k = 0; k < layout.cond_lengths.size(); ++k) os << (k ? "," : "") << layout.cond_lengths[k];
  os << "])";
  return os.str();
}

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

std::size_t AttentionMask::allowed_count() const {
  std::size_t n = 0;
  for (double e : entries_) n += e == 0.0;
  return n;
}

std::string AttentionMask::dump() const {
  std::string out;
  out.reserve(rows_ * (cols_ + 1));
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out += allows(i, j) ? '0' : '-';
    out += '\n';
  }
  return out;
}

AttentionMask AttentionMask::parse_dump(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    lines.push_back(text.substr(0, eol));
    if (eol == std::string_view::npos) break;
    text.remove_prefix(eol + 1);
  }
  if (lines.empty()) return {};
  AttentionMask mask(lines.size(), lines.front().size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].size() != mask.cols()) throw DimensionError("mask dump: ragged rows");
    for (std::size_t j = 0; j < mask.cols(); ++j) {
      if (lines[i][j] == '-') {
        mask.block(i, j);
      } else if (lines[i][j] != '0') {
        throw DimensionError("mask dump: unexpected character");
      }
    }
  }
  return mask;
}

AttentionMask build_full_mask(std::size_t n) { return AttentionMask(n, n); }

AttentionMask build_causal_mask(std::size_t n) {
  AttentionMask mask(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) mask.block(i, j);
  return mask;
}

AttentionMask build_scma_mask(const BranchLayout& layout) {
  const std::size_t n = layout.total();
  AttentionMask mask(n, n);
  std::size_t begin = layout.image_tokens();
  for (std::size_t len : layout.cond_lengths) {
    const std::size_t end = begin + len;
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (j < begin || j >= end) mask.block(i, j);
    begin = end;
  }
  return mask;
}

RopeFrequencies RopeFrequencies::make(std::size_t dim, double base) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("RoPE needs an even positive dimension, got " + std::to_string(dim));
  if (!(base > 1.0)) throw ConfigError("RoPE base must exceed 1");
  RopeFrequencies f;
  f.dim = dim;
  f.base = base;
  for (std::size_t j = 0; j < dim / 2; ++j)
    f.theta.push_back(std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(dim)));
  return f;
}

Tensor apply_rope(const Tensor& tokens, std::span<const std::size_t> positions,
                  const RopeFrequencies& freqs) {
  if (freqs.dim == 0 || freqs.dim % 2 != 0) throw ConfigError("apply_rope: odd or empty frequency table");
  const std::size_t n = tokens.rows(), d = tokens.cols();
  if (d % freqs.dim != 0)
    throw ConfigError("apply_rope: width " + std::to_string(d) + " is not a multiple of " +
                      std::to_string(freqs.dim));
  if (positions.size() != n) throw DimensionError("apply_rope: one position per token required");
  const std::size_t pairs = d / 2, head_pairs = freqs.dim / 2;
  std::vector<double> cos(n * pairs), sin(n * pairs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < pairs; ++j) {
      const double angle = static_cast<double>(positions[i]) * freqs.theta[j % head_pairs];
      cos[i * pairs + j] = std::cos(angle);
      sin[i * pairs + j] = std::sin(angle);
    }
  return rotate_pairs(tokens, cos, sin);
}

namespace {

Tensor attend_head(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor logits = scale(matmul_bt(q, k), inv_sqrt_d);
  Tensor weights = softmax_rows(logits, mask.entries());
  return matmul(weights, v);
}

}  // namespace

Tensor mma(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
           std::size_t n_heads) {
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows())
    throw DimensionError("mma: inconsistent Q " + shape_string(q.shape()) + ", K " +
                         shape_string(k.shape()) + ", V " + shape_string(v.shape()));
  if (!mask.empty() && (mask.rows() != q.rows() || mask.cols() != k.rows()))
    throw DimensionError("mma: mask shape does not match Q/K");
  const std::size_t d = q.cols();
  if (n_heads == 0 || d % n_heads != 0)
    throw ConfigError("mma: width " + std::to_string(d) + " not divisible into " +
                      std::to_string(n_heads) + " heads");
  if (n_heads == 1) return attend_head(q, k, v, mask);
  const std::size_t dh = d / n_heads;
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < n_heads; ++h)
    heads.push_back(attend_head(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh),
                                slice_cols(v, h * dh, dh), mask));
  return concat_cols(heads);
}

}  // namespace shaderflow
