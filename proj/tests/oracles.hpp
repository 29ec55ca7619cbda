// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used as test oracles. Deliberately naive and
// written without any library kernel or op, so agreement is meaningful.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "shaderflow/model.hpp"
#include "shaderflow/random.hpp"
#include "shaderflow/tensor.hpp"

namespace oracle {

using shaderflow::Tensor;

struct Xoshiro {
  std::uint64_t s[4];

  explicit Xoshiro(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t r = z;
      r = (r ^ (r >> 30)) * 0xbf58476d1ce4e5b9ULL;
      r = (r ^ (r >> 27)) * 0x94d049bb133111ebULL;
      w = r ^ (r >> 31);
    }
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t next() {
    const std::uint64_t out = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return out;
  }
};

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double acc = 0.0L;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<long double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<double>(acc);
    }
  return c;
}

// Membership rule of the mask: image rows see everything, condition rows
// only their own block.
inline bool scma_allows(const std::vector<std::size_t>& sizes, std::size_t i, std::size_t j) {
  auto owner = [&](std::size_t idx) {
    std::size_t start = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      if (idx < start + sizes[b]) return b;
      start += sizes[b];
    }
    return sizes.size();
  };
  const std::size_t bi = owner(i);
  return bi < 2 || bi == owner(j);
}

// softmax(q k^T / sqrt(d) + mask) v, row by row.
inline std::vector<double> attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const std::function<bool(std::size_t, std::size_t)>& allowed) {
  const std::size_t n = q.rows(), m = k.rows(), d = q.cols(), dv = v.cols();
  std::vector<double> out(n * dv, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(m, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (!allowed(i, j)) continue;
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) s += q.at(i, p) * k.at(j, p);
      w[j] = s / std::sqrt(static_cast<double>(d));
      top = std::max(top, w[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = allowed(i, j) ? std::exp(w[j] - top) : 0.0;
      z += w[j];
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < dv; ++c) out[i * dv + c] += w[j] / z * v.at(j, c);
  }
  return out;
}

inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = a.size() == b.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

// Every trainable tensor given random values, adapters and head included.
inline shaderflow::ModelState generic_state(const shaderflow::ModelConfig& cfg, std::uint64_t seed) {
  shaderflow::ModelState state = shaderflow::ModelState::init(cfg, seed);
  shaderflow::Rng rng(seed + 1000);
  for (shaderflow::ParamRef& p : state.parameters())
    if (p.adapter || p.name.rfind("head.", 0) == 0)
      *p.tensor = Tensor::uniform(p.tensor->shape(), rng, -0.3, 0.3, true);
  return state;
}

inline shaderflow::ConditionPatches toy_conditions(const shaderflow::ModelConfig& cfg, std::uint64_t seed) {
  const auto ds = shaderflow::make_synthetic_dataset(1, cfg.grid_h, cfg.grid_w, seed);
  return shaderflow::patchify_conditions(ds.samples.front().conditions(), cfg);
}

inline shaderflow::ModelConfig small_config() {
  shaderflow::ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_blocks = 2;
  cfg.lora_rank = 2;
  cfg.grid_h = 4;
  cfg.grid_w = 4;
  cfg.mlp_mult = 2;
  return cfg;
}

}  // namespace oracle
