// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/gradcheck.hpp"
#include "shaderflow/random.hpp"
#include "shaderflow/tensor.hpp"

using namespace shaderflow;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("construction enforces shape and finiteness") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), NumericError);
  CHECK_THROWS_AS(Tensor({1}, {kInf}), NumericError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(shape_string(t.shape()) == "[2x3]");
}

TEST_CASE("matmul examples") {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  CHECK(oracle::bitwise_equal(matmul(Tensor::eye(2), a), a));
  const Tensor c = matmul(a, Tensor({2, 2}, {5, 6, 7, 8}));
  CHECK(c.to_vector() == std::vector<double>{19, 22, 43, 50});
  const Tensor z = matmul(Tensor::zeros({3, 4}), Tensor::full({4, 2}, 7.0));
  CHECK(z.shape() == Shape{3, 2});
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 1})), DimensionError);
}

TEST_CASE("matmul agrees with a triple loop for random shapes up to 8x8") {
  Rng rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.next_u64() % 8, kk = 1 + rng.next_u64() % 8, n = 1 + rng.next_u64() % 8;
    const Tensor a = Tensor::randn({m, kk}, rng);
    const Tensor b = Tensor::randn({kk, n}, rng);
    const auto want = oracle::matmul(a.to_vector(), b.to_vector(), m, kk, n);
    CHECK(oracle::max_abs_diff(matmul(a, b).data(), want) < 1e-12);
    CHECK(oracle::max_abs_diff(matmul_bt(a, transpose(b)).data(), want) < 1e-12);
  }
}

TEST_CASE("softmax rows") {
  const Tensor u = softmax_rows(Tensor({1, 3}, {0, 0, 0}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<double> mask{-kInf, 0.0};
  const Tensor m = softmax_rows(Tensor({1, 2}, {5.0, 0.0}), mask);
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 1.0);

  const Tensor s = softmax_rows(Tensor({1, 3}, {1, 2, 3}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s[i] - std::exp(i + 1.0) / z) < 1e-15);
  CHECK(std::abs(s[0] - 0.09003057) < 1e-8);
  CHECK(std::abs(s[1] - 0.24472847) < 1e-8);
  CHECK(std::abs(s[2] - 0.66524096) < 1e-8);

  const std::vector<double> full_block{0.0, 0.0, -kInf, -kInf};
  try {
    softmax_rows(Tensor({2, 2}, {1, 2, 3, 4}), full_block);
    FAIL("expected an error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("softmax property: rows sum to one and shifts cancel") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.next_u64() % 6, n = 1 + rng.next_u64() % 6;
    const Tensor a = Tensor::randn({m, n}, rng, 3.0);
    const Tensor s = softmax_rows(a);
    const Tensor shifted = softmax_rows(add_scalar(a, rng.uniform(-50.0, 50.0)));
    for (std::size_t i = 0; i < m; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += s.at(i, j);
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(oracle::max_abs_diff(s.data(), shifted.data()) < 1e-12);
  }
}

TEST_CASE("layer norm") {
  const Tensor flat = layer_norm(Tensor({1, 3}, {1, 1, 1}), 1e-5);
  for (double v : flat.data()) CHECK(v == 0.0);
  const Tensor sym = layer_norm(Tensor({1, 2}, {-1000.0, 1000.0}), 1e-5);
  CHECK(sym[0] == doctest::Approx(-1.0));
  CHECK(sym[1] == doctest::Approx(1.0));
  const Tensor ln = layer_norm(Tensor({1, 3}, {1, 2, 3}), 1e-5);
  CHECK(std::abs(ln[0] + 1.22474) < 1e-4);
  CHECK(ln[1] == 0.0);
  CHECK(std::abs(ln[2] - 1.22474) < 1e-4);

  Rng rng(3);
  const Tensor wide = layer_norm(Tensor::randn({6, 10}, rng, 5.0), 1e-5);
  for (std::size_t r = 0; r < 6; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < 10; ++c) mu += wide.at(r, c);
    CHECK(std::abs(mu / 10.0) < 1e-10);
  }
}

TEST_CASE("backward examples") {
  const Tensor x({3}, {1, 2, 3}, true);
  sum(x).backward();
  CHECK(x.grad() == std::vector<double>{1, 1, 1});

  const Tensor y({2}, {1, 2}, true);
  sum(mul(y, y)).backward();
  CHECK(y.grad() == std::vector<double>{2, 4});

  CHECK_THROWS_AS(mul(y, y).backward(), DimensionError);
  CHECK_THROWS(Tensor::scalar(3.0).backward());
}

TEST_CASE("gradients accumulate until zero_grad") {
  const Tensor x({2}, {1, -1}, true);
  sum(scale(x, 3.0)).backward();
  sum(scale(x, 3.0)).backward();
  CHECK(x.grad() == std::vector<double>{6, 6});
  x.zero_grad();
  CHECK(x.grad() == std::vector<double>{0, 0});
}

TEST_CASE("finite_diff_grad examples") {
  Rng rng(4);
  const Tensor x = Tensor::randn({5}, rng);
  const Tensor g = finite_diff_grad([](const Tensor& t) { return sum(t).item(); }, x, 1e-5);
  for (double v : g.data()) CHECK(std::abs(v - 1.0) < 1e-9);
  const Tensor sq = finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, Tensor({1}, {3.0}), 1e-5);
  CHECK(std::abs(sq[0] - 6.0) < 1e-8);
  CHECK_THROWS_AS(finite_diff_grad([](const Tensor& t) { return std::log(t[0]); }, Tensor({1}, {0.0}), 1e-5),
                  NumericError);
}

// Random composite graphs of depth <= 6 built from the differentiable ops.
TEST_CASE("backward matches central differences on random composite graphs") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 2 + rng.next_u64() % 3, cols = 2 * (1 + rng.next_u64() % 2);
    const Tensor w = Tensor::randn({cols, cols}, rng, 0.5);
    const Tensor row = Tensor::randn({cols}, rng);
    std::vector<int> ops;
    const int depth = 1 + static_cast<int>(rng.next_u64() % 6);
    for (int i = 0; i < depth; ++i) ops.push_back(static_cast<int>(rng.next_u64() % 9));
    std::vector<double> angles(rows * cols / 2);
    for (double& a : angles) a = rng.uniform(0.0, 6.0);
    std::vector<double> cs(angles.size()), sn(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
      cs[i] = std::cos(angles[i]);
      sn[i] = std::sin(angles[i]);
    }

    // a weighted readout; sum of squares after layer_norm is nearly constant
    const Tensor probe = Tensor::randn({rows, cols}, rng);
    auto graph = [&](const Tensor& x) {
      Tensor h = x;
      for (int op : ops) {
        switch (op) {
          case 0: h = matmul(h, w); break;
          case 1: h = tanh(h); break;
          case 2: h = gelu(h); break;
          case 3: h = softmax_rows(h); break;
          case 4: h = layer_norm(h, 1e-5); break;
          case 5: h = add_row(h, row); break;
          case 6: h = mul(h, h); break;
          case 7: h = rotate_pairs(h, cs, sn); break;
          default: h = sub(exp(scale(h, 0.3)), transpose(transpose(h))); break;
        }
      }
      return sum(mul(probe, h));
    };
    const Tensor x = Tensor::randn({rows, cols}, rng, 0.7, true);
    graph(x).backward();
    const auto fd = oracle::central_diff(
        [&](const std::vector<double>& v) {
          NoGradGuard guard;
          return graph(Tensor({rows, cols}, v)).item();
        },
        x.to_vector(), 1e-5);
    INFO("trial " << trial);
    CHECK(oracle::rel_err(x.grad(), fd) < 1e-4);
  }
}

TEST_CASE("slicing and concatenation route gradients to their sources") {
  Rng rng(6);
  const Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  const Tensor b = Tensor::randn({2, 4}, rng, 1.0, true);
  const std::vector<Tensor> parts{a, b};
  const Tensor cat = concat_rows(parts);
  CHECK(cat.shape() == Shape{5, 4});
  const Tensor picked = slice_cols(slice_rows(cat, 2, 2), 1, 2);
  sum(scale(picked, 2.0)).backward();
  const auto ga = a.grad(), gb = b.grad();
  for (std::size_t i = 0; i < 12; ++i) CHECK(ga[i] == ((i / 4 == 2 && (i % 4 == 1 || i % 4 == 2)) ? 2.0 : 0.0));
  for (std::size_t i = 0; i < 8; ++i) CHECK(gb[i] == ((i / 4 == 0 && (i % 4 == 1 || i % 4 == 2)) ? 2.0 : 0.0));

  const std::vector<Tensor> cols{slice_cols(a, 0, 1), slice_cols(a, 1, 3)};
  CHECK(oracle::bitwise_equal(concat_cols(cols), a));
  CHECK(oracle::bitwise_equal(reshape(reshape(a, {12}), {3, 4}), a));
  CHECK_THROWS_AS(reshape(a, {5}), DimensionError);
}

TEST_CASE("tape visits each op once and replays to the same gradients") {
  Rng rng(7);
  const Tensor x = Tensor::randn({2, 3}, rng, 1.0, true);
  const Tensor w = Tensor::randn({3, 3}, rng, 1.0, true);
  const Tensor h = tanh(matmul(x, w));
  const Tensor loss = sum(add(h, h));
  const Tape tape = Tape::record(loss);
  CHECK(tape.op_count() == 4);
  tape.replay();
  const auto gx = x.grad(), gw = w.grad();
  x.zero_grad();
  w.zero_grad();
  loss.backward();
  CHECK(x.grad() == gx);
  CHECK(w.grad() == gw);
}

TEST_CASE("NoGradGuard stops taping") {
  const Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const Tensor y = scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(scale(x, 2.0).requires_grad());
}

TEST_CASE("ops surface non-finite results as errors") {
  CHECK_THROWS_AS(exp(Tensor({1}, {1000.0})), NumericError);
  CHECK_THROWS_AS(scale(Tensor({1}, {1e300}), 1e300), NumericError);
  CHECK_THROWS_AS(add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), DimensionError);
}

TEST_CASE("rotate_pairs rotates each pair and keeps its norm") {
  Rng rng(8);
  const Tensor a = Tensor::randn({3, 4}, rng);
  std::vector<double> cs(6), sn(6);
  for (std::size_t i = 0; i < 6; ++i) {
    const double th = rng.uniform(-3.0, 3.0);
    cs[i] = std::cos(th);
    sn[i] = std::sin(th);
  }
  const Tensor r = rotate_pairs(a, cs, sn);
  for (std::size_t row = 0; row < 3; ++row)
    for (std::size_t j = 0; j < 2; ++j) {
      const double x = a.at(row, 2 * j), y = a.at(row, 2 * j + 1);
      const double c = cs[row * 2 + j], s = sn[row * 2 + j];
      CHECK(std::abs(r.at(row, 2 * j) - (c * x - s * y)) < 1e-15);
      CHECK(std::abs(r.at(row, 2 * j + 1) - (s * x + c * y)) < 1e-15);
      CHECK(std::abs(std::hypot(r.at(row, 2 * j), r.at(row, 2 * j + 1)) - std::hypot(x, y)) < 1e-12);
    }
}

TEST_CASE("rng follows the documented update rule") {
  oracle::Xoshiro ref(42);
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_u64() == ref.next());

  Rng u(9);
  oracle::Xoshiro uref(9);
  for (int i = 0; i < 100; ++i) {
    const double v = u.uniform();
    CHECK(v == static_cast<double>(uref.next() >> 11) * 0x1.0p-53);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }

  Rng g(10);
  oracle::Xoshiro gref(10);
  const double u1 = 1.0 - static_cast<double>(gref.next() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(gref.next() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  CHECK(g.normal() == r * std::cos(2.0 * M_PI * u2));
  CHECK(g.normal() == r * std::sin(2.0 * M_PI * u2));
}

TEST_CASE("rng seeds give independent, repeatable streams") {
  Rng a(1), b(1), c(2);
  const auto va = a.next_u64();
  CHECK(va == b.next_u64());
  CHECK(va != c.next_u64());
  Rng parent(3);
  Rng child = parent.split();
  CHECK(child.next_u64() != parent.next_u64());
}
