// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "shaderflow/errors.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {
namespace {

thread_local bool t_grad_enabled = true;

void check_finite(std::span<const double> data, const char* op) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      std::ostringstream os;
      os << "non-finite value " << data[i] << " at flat index " << i << " in " << op;
      throw NumericError(os.str());
    }
  }
}

void check_shape(const Shape& shape, std::size_t size) {
  for (std::size_t extent : shape)
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  if (shape_numel(shape) != size) {
    std::ostringstream os;
    os << "shape " << shape_string(shape) << " needs " << shape_numel(shape) << " values, got "
       << size;
    throw DimensionError(os.str());
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  check_shape(shape, data.size());
  check_finite(data, "construction");
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad)
    : Tensor(std::move(shape), std::vector<double>(data), requires_grad) {}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(data));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape()));
  return node_->data[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() const { node_->grad.clear(); }

Tensor Tensor::detach(bool requires_grad) const { return Tensor(shape(), node_->data, requires_grad); }

Tensor Tensor::from_op(Shape shape, std::vector<double> data, const char* op,
                       std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
  check_finite(data, op);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  if (t_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); })) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) throw DimensionError("backward() needs a scalar loss, got " + shape_string(shape()));
  if (!requires_grad()) throw Error("backward() on a loss that is detached from the tape");
  Tape::record(*this).replay();
}

Tape Tape::record(const Tensor& loss) {
  Tape tape;
  if (!loss.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const auto& parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) stack.emplace_back(parent, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

std::size_t Tape::op_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return !n->is_leaf(); }));
}

void Tape::replay() const {
  if (nodes_.empty()) return;
  for (const auto& node : nodes_)
    if (!node->is_leaf()) node->grad.assign(node->data.size(), 0.0);
  nodes_.back()->ensure_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.is_leaf() || !node.backward) continue;
    for (const auto& parent : node.parents)
      if (parent->requires_grad) parent->ensure_grad();
    node.backward(node);
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace shaderflow
