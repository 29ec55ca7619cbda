// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Dense double-precision inner loops. Every kernel exists as a scalar
// reference and, where the CPU supports it, an AVX2+FMA variant. The active
// table is chosen once at startup (overridable through SHADERFLOW_ISA=scalar
// or force_isa()).
//
// All matrix kernels are row-major and compute each output element from its
// own row/column only, so the value of C[i][j] never depends on how many
// other rows are in the call. The KV cache relies on that.
namespace shaderflow::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // c[m x n] = a[m x k] * b[k x n]
  void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
  // c[m x n] = a[m x k] * b[n x k]^T
  void (*gemm_bt)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  // c[m x n] = a[k x m]^T * b[k x n]
  void (*gemm_at)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n);
  double (*max)(const double* a, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(SHADERFLOW_WITH_AVX2)
const KernelTable& avx2_table();
#endif

bool isa_available(Isa isa);
Isa active_isa();
const KernelTable& table(Isa isa);

// Switches the process-wide table. Not thread-safe against concurrent kernel
// calls; meant for tests and benchmarks.
void force_isa(Isa isa);

// Running count of scalar multiplies issued by the matrix kernels below.
std::uint64_t multiply_count();
void reset_multiply_count();

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n);
void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
double max(std::span<const double> a);

}  // namespace shaderflow::kernels
