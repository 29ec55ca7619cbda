// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shaderflow/flow.hpp"
#include "shaderflow/model.hpp"

namespace shaderflow::config {

// `key = value` lines, '#' starts a comment, blank lines ignored.
struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::vector<Entry> parse_key_values(std::string_view text);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

double parse_real(std::string_view key, std::string_view value);
std::uint64_t parse_unsigned(std::string_view key, std::string_view value);
bool parse_flag(std::string_view key, std::string_view value);  // true/false, on/off, 1/0, yes/no

enum class KeyType { integer, real, flag, text };

struct KeySpec {
  std::string_view name;
  KeyType type;
  std::string_view default_value;
  std::string_view help;
};

// Every configurable key with its default.
const std::vector<KeySpec>& key_specs();
const KeySpec* find_key(std::string_view name);

// Defaults, overlaid by a config file, overlaid by command-line flags.
class RunConfig {
 public:
  RunConfig();

  // Throws ConfigError on unknown keys or unparseable values.
  void set(std::string_view key, std::string_view value);
  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text);

  const std::string& get(std::string_view key) const;
  double real(std::string_view key) const;
  std::uint64_t integer(std::string_view key) const;
  bool flag(std::string_view key) const;
  // True once a file, --set or flag has given the key a value.
  bool is_set(std::string_view key) const;

  ModelConfig model() const;
  FlowConfig flow() const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::set<std::string, std::less<>> explicit_;
};

// Model architecture keys of a ModelConfig, for manifests.
std::vector<std::pair<std::string, std::string>> model_entries(const ModelConfig& cfg);

// Help text listing every key, its type and default.
std::string keys_help();

}  // namespace shaderflow::config
