// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "shaderflow/tensor.hpp"

namespace shaderflow::io {

// Plain-text tensor files:
//
//   tensor v1
//   <rank> <extent_0> ... <extent_{rank-1}>
//   <values, row-major, one last-axis row per line>
//
// Values are written as the shortest decimal that round-trips exactly.
std::string format_tensor(const Tensor& t);
Tensor parse_tensor(std::string_view text);
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Shortest round-trip decimal for a double.
std::string format_double(double v);

// ASCII netpbm images (P2 grey / P3 color). values holds channel-interleaved
// samples scaled to [0, 1] by maxval.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> values;
};

inline constexpr int kPnmMaxval = 65535;

Image parse_pnm(std::string_view text);
Image read_pnm(const std::filesystem::path& path);
// Writes P2 for 1 channel, P3 for 3 channels, maxval 65535. Samples are
// clamped to [0, 1] and rounded to the nearest level.
std::string format_pnm(const Image& image);
void write_pnm(const std::filesystem::path& path, const Image& image);

// [H x W] for one channel, [H x W x C] otherwise.
Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& t);

// Reads either format, sniffing the magic line.
Tensor load_map(const std::filesystem::path& path);
bool is_tensor_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace shaderflow::io
