// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shaderflow/errors.hpp"

namespace shaderflow {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: step h must be positive");
  std::vector<double> point = x.to_vector();
  std::vector<double> grad(point.size());
  auto eval = [&](std::size_t i) {
    const double value = f(Tensor(x.shape(), point));
    if (!std::isfinite(value))
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " + std::to_string(i));
    return value;
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double origin = point[i];
    point[i] = origin + h;
    const double up = eval(i);
    point[i] = origin - h;
    const double down = eval(i);
    point[i] = origin;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(grad));
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace shaderflow
