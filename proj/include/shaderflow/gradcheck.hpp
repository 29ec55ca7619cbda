// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>

#include "shaderflow/tensor.hpp"

namespace shaderflow {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Independent of the tape: f only sees detached copies of x.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

// ||a - b||_2 / max(||a||_2, ||b||_2, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

}  // namespace shaderflow
