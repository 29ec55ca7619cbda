// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <limits>

#include "shaderflow/kernels.hpp"

namespace shaderflow::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sw = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// One output row: crow[j] = sum_p arow[p * stride] * b[p][j], accumulated in
// p order for every column.
inline void gemm_row(const double* arow, std::size_t astride, const double* b, double* crow,
                     std::size_t k, std::size_t n) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    __m256d c2 = _mm256_setzero_pd(), c3 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d va = _mm256_set1_pd(arow[p * astride]);
      const double* brow = b + p * n + j;
      c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow), c0);
      c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + 4), c1);
      c2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + 8), c2);
      c3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + 12), c3);
    }
    _mm256_storeu_pd(crow + j, c0);
    _mm256_storeu_pd(crow + j + 4, c1);
    _mm256_storeu_pd(crow + j + 8, c2);
    _mm256_storeu_pd(crow + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
      c0 = _mm256_fmadd_pd(_mm256_set1_pd(arow[p * astride]), _mm256_loadu_pd(b + p * n + j), c0);
    _mm256_storeu_pd(crow + j, c0);
  }
  for (; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p * astride] * b[p * n + j];
    crow[j] = acc;
  }
}

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(a + i * k, 1, b, c + i * n, k, n);
}

void gemm_bt_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_avx2(a + i * k, b + j * k, k);
}

void gemm_at_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(a + i, m, b, c + i * n, k, n);
}

double max_avx2(const double* a, std::size_t n) {
  double best = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vb = _mm256_loadu_pd(a);
    for (i = 4; i + 4 <= n; i += 4) vb = _mm256_max_pd(vb, _mm256_loadu_pd(a + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vb);
    best = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  }
  for (; i < n; ++i) best = std::max(best, a[i]);
  return best;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{dot_avx2,     axpy_avx2,    gemm_avx2,
                                 gemm_bt_avx2, gemm_at_avx2, max_avx2};
  return table;
}

}  // namespace shaderflow::kernels
