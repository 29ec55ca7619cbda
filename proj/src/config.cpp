// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "shaderflow/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"

namespace shaderflow::config {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                    std::string(value) + "'");
}

const std::vector<KeySpec> kKeys = {
    {"d_model", KeyType::integer, "16", "token width (even)"},
    {"n_blocks", KeyType::integer, "2", "transformer blocks"},
    {"n_heads", KeyType::integer, "1", "attention heads; d_model / n_heads must be even"},
    {"lora_rank", KeyType::integer, "4", "LoRA rank r, 1 <= r <= d_model / 2"},
    {"patch_size", KeyType::integer, "1", "patch edge in latent pixels"},
    {"grid_h", KeyType::integer, "8", "latent grid height"},
    {"grid_w", KeyType::integer, "8", "latent grid width"},
    {"mlp_mult", KeyType::integer, "4", "MLP hidden width as a multiple of d_model"},
    {"learning_rate", KeyType::real, "1e-4", "SGD learning rate"},
    {"rope_base", KeyType::real, "10000", "RoPE frequency base"},
    {"ln_eps", KeyType::real, "1e-5", "layer norm epsilon"},
    {"seed", KeyType::integer, "0", "64-bit seed for every random draw"},
    {"train_steps", KeyType::integer, "2000", "SGD steps for train"},
    {"dataset_size", KeyType::integer, "16", "samples in the synthetic dataset"},
    {"frozen_base", KeyType::flag, "false", "train LoRA adapters only"},
    {"num_steps", KeyType::integer, "25", "Euler sampling steps"},
    {"cache", KeyType::flag, "on", "reuse condition K/V across sampling steps"},
    {"cache_material", KeyType::flag, "false", "also cache the first-block material K/V"},
    {"strength_depth", KeyType::real, "1.0", "depth adapter strength"},
    {"strength_normal", KeyType::real, "1.2", "normal adapter strength"},
    {"strength_lighting", KeyType::real, "0.8", "lighting adapter strength"},
    {"lambda_reg", KeyType::real, "0.1", "depth alignment range regularizer weight"},
    {"align_iters", KeyType::integer, "500", "Nelder-Mead iterations for depth alignment"},
    {"ensemble_n", KeyType::integer, "5", "predictions per synthetic ensemble"},
    {"bench_runs", KeyType::integer, "5", "timed runs per bench-kv mode (median reported)"},
};

}  // namespace

std::vector<Entry> parse_key_values(std::string_view text) {
  std::vector<Entry> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v))
    bad_value(key, value, "a finite real");
  return v;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return v;
}

bool parse_flag(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "off" || value == "0" || value == "no") return false;
  bad_value(key, value, "true/false or on/off");
}

const std::vector<KeySpec>& key_specs() { return kKeys; }

const KeySpec* find_key(std::string_view name) {
  for (const KeySpec& k : kKeys)
    if (k.name == name) return &k;
  return nullptr;
}

RunConfig::RunConfig() {
  for (const KeySpec& k : kKeys) values_.emplace(std::string(k.name), std::string(k.default_value));
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + std::string(key) + "'");
  switch (spec->type) {
    case KeyType::integer: parse_unsigned(key, value); break;
    case KeyType::real: parse_real(key, value); break;
    case KeyType::flag: parse_flag(key, value); break;
    case KeyType::text: break;
  }
  values_[std::string(key)] = std::string(value);
  explicit_.insert(std::string(key));
}

bool RunConfig::is_set(std::string_view key) const { return explicit_.find(key) != explicit_.end(); }

void RunConfig::merge_text(std::string_view text) {
  for (const Entry& e : parse_key_values(text)) {
    try {
      set(e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  try {
    merge_text(io::read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double RunConfig::real(std::string_view key) const { return parse_real(key, get(key)); }
std::uint64_t RunConfig::integer(std::string_view key) const { return parse_unsigned(key, get(key)); }
bool RunConfig::flag(std::string_view key) const { return parse_flag(key, get(key)); }

ModelConfig RunConfig::model() const {
  ModelConfig cfg;
  cfg.d_model = integer("d_model");
  cfg.n_blocks = integer("n_blocks");
  cfg.n_heads = integer("n_heads");
  cfg.lora_rank = integer("lora_rank");
  cfg.patch_size = integer("patch_size");
  cfg.grid_h = integer("grid_h");
  cfg.grid_w = integer("grid_w");
  cfg.mlp_mult = integer("mlp_mult");
  cfg.learning_rate = real("learning_rate");
  cfg.rope_base = real("rope_base");
  cfg.ln_eps = real("ln_eps");
  cfg.validate();
  return cfg;
}

FlowConfig RunConfig::flow() const {
  FlowConfig cfg;
  cfg.num_steps = integer("num_steps");
  cfg.seed = integer("seed");
  if (cfg.num_steps < 1) throw ConfigError("num_steps must be at least 1");
  return cfg;
}

std::vector<std::pair<std::string, std::string>> model_entries(const ModelConfig& cfg) {
  return {{"d_model", std::to_string(cfg.d_model)},
          {"n_blocks", std::to_string(cfg.n_blocks)},
          {"n_heads", std::to_string(cfg.n_heads)},
          {"lora_rank", std::to_string(cfg.lora_rank)},
          {"patch_size", std::to_string(cfg.patch_size)},
          {"grid_h", std::to_string(cfg.grid_h)},
          {"grid_w", std::to_string(cfg.grid_w)},
          {"mlp_mult", std::to_string(cfg.mlp_mult)},
          {"learning_rate", io::format_double(cfg.learning_rate)},
          {"rope_base", io::format_double(cfg.rope_base)},
          {"ln_eps", io::format_double(cfg.ln_eps)}};
}

std::string keys_help() {
  std::ostringstream os;
  os << "Config keys (config file `key = value`, or --set key=value):\n";
  for (const KeySpec& k : kKeys) {
    const char* type = k.type == KeyType::integer ? "int" : k.type == KeyType::real ? "real"
                       : k.type == KeyType::flag  ? "flag"
                                                  : "text";
    os << "  " << k.name << " (" << type << ", default " << k.default_value << "): " << k.help << "\n";
  }
  return os.str();
}

}  // namespace shaderflow::config
