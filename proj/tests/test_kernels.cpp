// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "shaderflow/kernels.hpp"
#include "shaderflow/random.hpp"

using namespace shaderflow;
namespace k = shaderflow::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

std::vector<double> transposed(const std::vector<double>& a, std::size_t rows, std::size_t cols) {
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

// Every table the machine can run, scalar first.
std::vector<const k::KernelTable*> tables() {
  std::vector<const k::KernelTable*> out{&k::scalar_table()};
  if (k::isa_available(k::Isa::avx2)) out.push_back(&k::table(k::Isa::avx2));
  return out;
}

}  // namespace

TEST_CASE("every kernel table matches the naive oracle on ragged sizes") {
  Rng rng(3);
  for (const k::KernelTable* tab : tables())
    for (std::size_t m : {1u, 2u, 3u, 5u})
      for (std::size_t kk : {1u, 3u, 4u, 7u, 9u})
        for (std::size_t n : {1u, 4u, 5u, 11u}) {
          const auto a = random_vec(m * kk, rng);
          const auto b = random_vec(kk * n, rng);
          const auto want = oracle::matmul(a, b, m, kk, n);

          std::vector<double> c(m * n);
          tab->gemm(a.data(), b.data(), c.data(), m, kk, n);
          CHECK(oracle::max_abs_diff(c, want) < 1e-12);

          const auto bt = transposed(b, kk, n);
          tab->gemm_bt(a.data(), bt.data(), c.data(), m, kk, n);
          CHECK(oracle::max_abs_diff(c, want) < 1e-12);

          const auto at = transposed(a, m, kk);
          tab->gemm_at(at.data(), b.data(), c.data(), m, kk, n);
          CHECK(oracle::max_abs_diff(c, want) < 1e-12);
        }
}

TEST_CASE("dot, axpy and max agree across tables, including tails") {
  Rng rng(4);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 13u, 64u, 67u}) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    long double ref = 0.0L;
    for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(a[i]) * b[i];
    for (const k::KernelTable* tab : tables()) {
      CHECK(std::abs(tab->dot(a.data(), b.data(), n) - static_cast<double>(ref)) < 1e-12);
      auto y = b;
      tab->axpy(0.75, a.data(), y.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.75 * a[i]).epsilon(1e-15));
      if (n > 0) CHECK(tab->max(a.data(), n) == *std::max_element(a.begin(), a.end()));
    }
  }
}

TEST_CASE("a gemm row does not depend on how many rows share the call") {
  Rng rng(5);
  const std::size_t kk = 13, n = 9;
  const auto a = random_vec(7 * kk, rng);
  const auto b = random_vec(kk * n, rng);
  const auto bt = transposed(b, kk, n);
  for (const k::KernelTable* tab : tables()) {
    std::vector<double> full(7 * n), one(n);
    tab->gemm(a.data(), b.data(), full.data(), 7, kk, n);
    for (std::size_t r = 0; r < 7; ++r) {
      tab->gemm(a.data() + r * kk, b.data(), one.data(), 1, kk, n);
      CHECK(std::equal(one.begin(), one.end(), full.begin() + r * n));
    }
    tab->gemm_bt(a.data(), bt.data(), full.data(), 7, kk, n);
    for (std::size_t r = 0; r < 7; ++r) {
      tab->gemm_bt(a.data() + r * kk, bt.data(), one.data(), 1, kk, n);
      CHECK(std::equal(one.begin(), one.end(), full.begin() + r * n));
    }
  }
}

TEST_CASE("front-end counts multiplies and honours force_isa") {
  const k::Isa before = k::active_isa();
  k::force_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  k::reset_multiply_count();
  std::vector<double> a(6, 1.0), b(12, 1.0), c(8);
  k::gemm(a, b, c, 2, 3, 4);
  CHECK(k::multiply_count() == 24);
  k::dot(std::span<const double>(a).first(3), std::span<const double>(b).first(3));
  CHECK(k::multiply_count() == 27);
  CHECK(c[0] == 3.0);
  k::force_isa(k::Isa::avx2);
  CHECK(k::active_isa() == (k::isa_available(k::Isa::avx2) ? k::Isa::avx2 : k::Isa::scalar));
  k::force_isa(before);
  CHECK(k::isa_name(k::Isa::avx2) == "avx2");
}
