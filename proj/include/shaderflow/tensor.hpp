// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shaderflow {

class Rng;

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major array of doubles. A Tensor is a cheap shared handle; the
// values are immutable after construction and only the gradient buffer of a
// requires_grad tensor is written to (by backward()). All entries are finite.
class Tensor {
 public:
  // Rank-0 zero.
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
  Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::vector<double> to_vector() const { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad() const;

  // New leaf holding a copy of the values.
  Tensor detach(bool requires_grad = false) const;

  // Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  // calls until zero_grad().
  void backward() const;

  const char* op_name() const { return node_->op; }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Used by op implementations.
  static Tensor from_op(Shape shape, std::vector<double> data, const char* op,
                        std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the differentiable ops reachable from a loss, in
// topological order (inputs before outputs).
class Tape {
 public:
  static Tape record(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  std::size_t op_count() const;
  // Seeds d(loss)/d(loss) = 1 and visits every recorded op once, in reverse.
  void replay() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

bool grad_enabled();

// Disables taping on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- differentiable ops ---------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m x k] * [k x n]
Tensor matmul_bt(const Tensor& a, const Tensor& b);  // [m x k] * [n x k]^T
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// a[m x n] + row[n] broadcast over rows; row may be [n] or [1 x n].
Tensor add_row(const Tensor& a, const Tensor& row);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
// Tanh approximation of GELU.
Tensor gelu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& prediction, const Tensor& target);

// Row-wise softmax of a[m x n] + mask. mask is empty or m*n additive entries
// that are 0 or -infinity. Throws NumericError when a row is fully masked.
Tensor softmax_rows(const Tensor& a, std::span<const double> mask = {});

// Normalizes over the last axis, no affine.
Tensor layer_norm(const Tensor& a, double eps);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// For every row r and pair j rotates (a[r][2j], a[r][2j+1]) by the angle whose
// cosine/sine are cos[r * pairs + j] / sin[r * pairs + j], pairs = cols / 2.
Tensor rotate_pairs(const Tensor& a, std::span<const double> cos, std::span<const double> sin);

}  // namespace shaderflow
