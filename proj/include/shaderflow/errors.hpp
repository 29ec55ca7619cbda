// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace shaderflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or layout disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration or argument value (odd RoPE width, negative strength, ...).
struct ConfigError : Error {
  using Error::Error;
};

// NaN/Inf, fully masked softmax rows, divergence.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace shaderflow
