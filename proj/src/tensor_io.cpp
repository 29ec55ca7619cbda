// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"

namespace shaderflow::io {
namespace {

constexpr std::string_view kMagic = "tensor v1";

class Tokens {
 public:
  explicit Tokens(std::string_view text) : text_(text) {}

  bool next(std::string_view& out) {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    if (pos_ >= text_.size()) return false;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    out = text_.substr(start, pos_ - start);
    return true;
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
  std::string_view text_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(std::string_view token, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw IoError(std::string("tensor file: bad ") + what + " '" + std::string(token) + "'");
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_tensor(const Tensor& t) {
  std::string out(kMagic);
  out += '\n';
  out += std::to_string(t.rank());
  for (std::size_t extent : t.shape()) out += ' ' + std::to_string(extent);
  out += '\n';
  const std::size_t row = t.rank() == 0 ? 1 : t.shape().back();
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += format_double(data[i]);
    out += (i + 1) % row == 0 ? '\n' : ' ';
  }
  return out;
}

Tensor parse_tensor(std::string_view text) {
  const std::size_t eol = text.find('\n');
  std::string_view first = text.substr(0, eol);
  if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
  if (first != kMagic) throw IoError("tensor file: missing 'tensor v1' header");
  if (eol == std::string_view::npos) throw IoError("tensor file: missing shape line");
  text.remove_prefix(eol + 1);

  const std::size_t shape_end = text.find('\n');
  Tokens shape_tokens(text.substr(0, shape_end));
  std::string_view token;
  if (!shape_tokens.next(token)) throw IoError("tensor file: empty shape line");
  const auto rank = parse_number<std::size_t>(token, "rank");
  Shape shape;
  for (std::size_t i = 0; i < rank; ++i) {
    if (!shape_tokens.next(token)) throw IoError("tensor file: shape line shorter than rank");
    shape.push_back(parse_number<std::size_t>(token, "extent"));
  }
  if (shape_tokens.next(token)) throw IoError("tensor file: shape line longer than rank");

  std::vector<double> values;
  if (shape_end != std::string_view::npos) {
    Tokens value_tokens(text.substr(shape_end + 1));
    while (value_tokens.next(token)) values.push_back(parse_number<double>(token, "value"));
  }
  try {
    return Tensor(std::move(shape), std::move(values));
  } catch (const Error& e) {
    throw IoError(std::string("tensor file: ") + e.what());
  }
}

void write_tensor(std::ostream& os, const Tensor& t) { os << format_tensor(t); }

Tensor read_tensor(std::istream& is) {
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_tensor(text);
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file(path, format_tensor(t));
}

Tensor load_tensor(const std::filesystem::path& path) {
  try {
    return parse_tensor(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("short write to " + path.string());
}

bool is_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line == kMagic;
}

}  // namespace shaderflow::io
