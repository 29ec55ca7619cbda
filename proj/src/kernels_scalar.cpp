// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <limits>

#include "shaderflow/kernels.hpp"

namespace shaderflow::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_scalar(a[i * k + p], b + p * n, crow, n);
  }
}

void gemm_bt_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_scalar(a + i * k, b + j * k, k);
}

void gemm_at_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) axpy_scalar(a[p * m + i], b + p * n, c + i * n, n);
}

double max_scalar(const double* a, std::size_t n) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) best = std::max(best, a[i]);
  return best;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar,     axpy_scalar,    gemm_scalar,
                                 gemm_bt_scalar, gemm_at_scalar, max_scalar};
  return table;
}

}  // namespace shaderflow::kernels
