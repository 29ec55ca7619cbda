// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint directory layout:
//
//   manifest.txt               key = value lines
//   <param>.tensor             one file per base parameter
//   blocks.<b>.lora.<cond>.<slot>.tensor
//                              one file per adapter, [2r x d]: rows 0..r-1
//                              hold A, rows r..2r-1 hold B^T
//
// The manifest carries the model keys, `lora_rank`, `strength.<cond>` and a
// `tensor.<name>` / `adapter.<b>.<cond>.<slot>` entry naming each file.

#include <filesystem>
#include <map>

#include "shaderflow/config.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"
#include "shaderflow/model.hpp"

namespace shaderflow {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kFormat = "shaderflow-checkpoint v1";

std::string adapter_key(std::size_t block, Condition c, Slot s) {
  return std::to_string(block) + "." + std::string(condition_name(c)) + "." + std::string(slot_name(s));
}

Tensor pack_adapter(const LoraAdapter& ad) {
  const std::vector<Tensor> parts{ad.a, transpose(ad.b)};
  return concat_rows(parts).detach();
}

void unpack_adapter(const Tensor& packed, LoraAdapter& ad) {
  const std::size_t r = ad.rank(), d = ad.dim();
  if (packed.rank() != 2 || packed.rows() != 2 * r || packed.cols() != d)
    throw IoError("adapter tensor " + shape_string(packed.shape()) + " does not match rank " + std::to_string(r) +
                  ", width " + std::to_string(d));
  NoGradGuard no_grad;
  ad.a = slice_rows(packed, 0, r).detach(true);
  ad.b = transpose(slice_rows(packed, r, r)).detach(true);
}

}  // namespace

void save_checkpoint(const std::string& dir, ModelState& state) {
  const fs::path root(dir);
  fs::create_directories(root);
  std::vector<std::pair<std::string, std::string>> manifest{{"format", std::string(kFormat)}};
  for (auto& kv : config::model_entries(state.cfg)) manifest.push_back(kv);
  for (Condition c : kConditions)
    manifest.emplace_back("strength." + std::string(condition_name(c)),
                          io::format_double(state.blocks.front().adapters.strength(c)));

  for (const ParamRef& p : state.parameters()) {
    if (p.adapter) continue;
    const std::string file = p.name + ".tensor";
    io::save_tensor(root / file, *p.tensor);
    manifest.emplace_back("tensor." + p.name, file);
  }
  for (std::size_t b = 0; b < state.blocks.size(); ++b)
    for (Condition c : kConditions)
      for (Slot s : kSlots) {
        const std::string key = adapter_key(b, c, s);
        const std::string file = "blocks." + std::to_string(b) + ".lora." + std::string(condition_name(c)) + "." +
                                 std::string(slot_name(s)) + ".tensor";
        io::save_tensor(root / file, pack_adapter(state.blocks[b].adapters.adapter(c, s)));
        manifest.emplace_back("adapter." + key, file);
      }
  io::write_file(root / "manifest.txt", "# shaderflow checkpoint\n" + config::format_key_values(manifest));
}

ModelState load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.txt")) throw IoError("no checkpoint manifest in " + dir);
  std::map<std::string, std::string> entries;
  for (const auto& e : config::parse_key_values(io::read_file(root / "manifest.txt"))) entries[e.key] = e.value;
  if (entries["format"] != kFormat) throw IoError(dir + ": unsupported checkpoint format");

  config::RunConfig rc;
  for (const auto& [k, v] : entries)
    if (config::find_key(k)) rc.set(k, v);
  ModelState state = ModelState::init(rc.model(), 0);

  auto require = [&](const std::string& key) -> const std::string& {
    auto it = entries.find(key);
    if (it == entries.end()) throw IoError(dir + ": manifest lacks '" + key + "'");
    return it->second;
  };
  for (ParamRef& p : state.parameters()) {
    if (p.adapter) continue;
    Tensor loaded = io::load_tensor(root / require("tensor." + p.name));
    if (loaded.shape() != p.tensor->shape())
      throw IoError(dir + ": " + p.name + " has shape " + shape_string(loaded.shape()) + ", expected " +
                    shape_string(p.tensor->shape()));
    *p.tensor = loaded.detach(true);
  }
  for (std::size_t b = 0; b < state.blocks.size(); ++b)
    for (Condition c : kConditions)
      for (Slot s : kSlots)
        unpack_adapter(io::load_tensor(root / require("adapter." + adapter_key(b, c, s))),
                       state.blocks[b].adapters.adapter(c, s));
  for (Condition c : kConditions)
    state = with_strength(std::move(state), c,
                          config::parse_real("strength", require("strength." + std::string(condition_name(c)))));
  return state;
}

}  // namespace shaderflow
