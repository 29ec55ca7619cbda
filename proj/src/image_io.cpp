// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"

namespace shaderflow::io {
namespace {

// Netpbm header/body tokens with '#' comments stripped.
class PnmReader {
 public:
  explicit PnmReader(std::string_view text) : text_(text) {}

  std::string_view token() {
    for (;;) {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    if (pos_ >= text_.size()) throw IoError("pnm: unexpected end of data");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '#')
      ++pos_;
    return text_.substr(start, pos_ - start);
  }

  long number() {
    const std::string_view tok = token();
    long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || value < 0)
      throw IoError("pnm: bad number '" + std::string(tok) + "'");
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Image parse_pnm(std::string_view text) {
  PnmReader reader(text);
  const std::string_view magic = reader.token();
  Image image;
  if (magic == "P2") {
    image.channels = 1;
  } else if (magic == "P3") {
    image.channels = 3;
  } else {
    throw IoError("pnm: only ASCII P2/P3 supported, got '" + std::string(magic) + "'");
  }
  image.width = static_cast<std::size_t>(reader.number());
  image.height = static_cast<std::size_t>(reader.number());
  const long maxval = reader.number();
  if (image.width == 0 || image.height == 0) throw IoError("pnm: empty image");
  if (maxval <= 0 || maxval > 65535) throw IoError("pnm: maxval out of range");
  const std::size_t count = image.width * image.height * image.channels;
  image.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const long v = reader.number();
    if (v > maxval) throw IoError("pnm: sample exceeds maxval");
    image.values[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return image;
}

Image read_pnm(const std::filesystem::path& path) {
  try {
    return parse_pnm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_pnm(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw IoError("pnm: need 1 or 3 channels, got " + std::to_string(image.channels));
  if (image.values.size() != image.width * image.height * image.channels)
    throw IoError("pnm: sample count does not match dimensions");
  std::string out = image.channels == 1 ? "P2\n" : "P3\n";
  out += std::to_string(image.width) + ' ' + std::to_string(image.height) + '\n';
  out += std::to_string(kPnmMaxval) + '\n';
  const std::size_t row = image.width * image.channels;
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    const double v = std::clamp(image.values[i], 0.0, 1.0);
    out += std::to_string(std::lround(v * kPnmMaxval));
    out += (i + 1) % row == 0 ? '\n' : ' ';
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  write_file(path, format_pnm(image));
}

Tensor image_to_tensor(const Image& image) {
  if (image.channels == 1) return Tensor({image.height, image.width}, image.values);
  return Tensor({image.height, image.width, image.channels}, image.values);
}

Image tensor_to_image(const Tensor& t) {
  Image image;
  if (t.rank() == 2) {
    image.channels = 1;
  } else if (t.rank() == 3) {
    image.channels = t.shape()[2];
  } else {
    throw DimensionError("tensor_to_image: need [H x W] or [H x W x C], got " + shape_string(t.shape()));
  }
  image.height = t.shape()[0];
  image.width = t.shape()[1];
  image.values = t.to_vector();
  return image;
}

Tensor load_map(const std::filesystem::path& path) {
  if (is_tensor_file(path)) return load_tensor(path);
  return image_to_tensor(read_pnm(path));
}

}  // namespace shaderflow::io
