// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

namespace shaderflow::kernels {
namespace {

std::atomic<std::uint64_t> g_multiplies{0};

bool cpu_has_avx2() {
#if defined(SHADERFLOW_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("SHADERFLOW_ISA")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

inline void count(std::uint64_t n) { g_multiplies.fetch_add(n, std::memory_order_relaxed); }

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const KernelTable& table(Isa isa) {
#if defined(SHADERFLOW_WITH_AVX2)
  if (isa == Isa::avx2 && cpu_has_avx2()) return avx2_table();
#endif
  (void)isa;
  return scalar_table();
}

void force_isa(Isa isa) { current().store(isa_available(isa) ? isa : Isa::scalar); }

std::uint64_t multiply_count() { return g_multiplies.load(std::memory_order_relaxed); }
void reset_multiply_count() { g_multiplies.store(0, std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  count(a.size());
  return table(active_isa()).dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  count(x.size());
  table(active_isa()).axpy(alpha, x.data(), y.data(), x.size());
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n) {
  assert(a.size() == m * k && b.size() == k * n && c.size() == m * n);
  count(m * k * n);
  table(active_isa()).gemm(a.data(), b.data(), c.data(), m, k, n);
}

void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  assert(a.size() == m * k && b.size() == n * k && c.size() == m * n);
  count(m * k * n);
  table(active_isa()).gemm_bt(a.data(), b.data(), c.data(), m, k, n);
}

void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  assert(a.size() == k * m && b.size() == k * n && c.size() == m * n);
  count(m * k * n);
  table(active_isa()).gemm_at(a.data(), b.data(), c.data(), m, k, n);
}

double max(std::span<const double> a) { return table(active_isa()).max(a.data(), a.size()); }

}  // namespace shaderflow::kernels
