// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace shaderflow {

class Rng;

struct NelderMeadOptions {
  std::size_t max_iters = 500;
  double initial_step = 0.1;
  // Restart from the best vertex once the simplex spread in f falls below
  // this, while iterations remain.
  double restart_spread = 1e-14;
  // Also restart after this many iterations without a 0.1% improvement.
  std::size_t stall_iters = 50;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  // Best-so-far objective after each iteration (trace[0] is the start point).
  std::vector<double> trace;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
};

using Objective = std::function<double(std::span<const double>)>;

// Throws NumericError if the objective returns a non-finite value. `rng`, if
// given, orients restart simplices randomly.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& options,
                             Rng* rng = nullptr);

}  // namespace shaderflow
