// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

// shaderflow command-line front end.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure,
// 4 verification failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "shaderflow/checks.hpp"
#include "shaderflow/config.hpp"
#include "shaderflow/ensemble.hpp"
#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"
#include "shaderflow/kvcache.hpp"
#include "shaderflow/model.hpp"
#include "shaderflow/random.hpp"

namespace fs = std::filesystem;
using namespace shaderflow;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

struct UsageError : Error {
  using Error::Error;
};

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
};

config::RunConfig load_config(const Common& common) {
  config::RunConfig rc;
  if (!common.config_file.empty()) rc.merge_file(common.config_file);
  for (const std::string& kv : common.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return rc;
}

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_file, "config file of `key = value` lines")->check(CLI::ExistingFile);
  app->add_option("--set", common.overrides, "override one config key, key=value (repeatable)");
}

// ---- map conversion --------------------------------------------------------------

// [H x W] or [H x W x C] channel-last maps to channel-major latents.
LatentImage to_latent(const Tensor& map, Role role, bool from_image) {
  const Shape& s = map.shape();
  if (s.size() != 2 && s.size() != 3)
    throw DimensionError(std::string(role_name(role)) + ": expected an [H x W] or [H x W x C] map");
  const std::size_t h = s[0], w = s[1], c = s.size() == 3 ? s[2] : 1;
  const std::size_t want = role_channels(role);
  LatentImage img = LatentImage::zeros(role, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double* px = map.data().data() + (y * w + x) * c;
      if (c == want) {
        for (std::size_t k = 0; k < want; ++k) img.at(k, y, x) = px[k];
      } else if (want == 1 && c == 3) {
        img.at(0, y, x) = (px[0] + px[1] + px[2]) / 3.0;
      } else if (want == 3 && c == 1) {
        for (std::size_t k = 0; k < 3; ++k) img.at(k, y, x) = px[0];
      } else {
        throw DimensionError(std::string(role_name(role)) + ": " + std::to_string(c) + " channels, expected " +
                             std::to_string(want));
      }
    }
  if (role == Role::normal) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double n[3];
        for (std::size_t k = 0; k < 3; ++k) n[k] = from_image ? 2.0 * img.at(k, y, x) - 1.0 : img.at(k, y, x);
        const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if (len < 1e-12) throw NumericError("normal map has a zero vector at (" + std::to_string(y) + ", " +
                                            std::to_string(x) + ")");
        for (std::size_t k = 0; k < 3; ++k) img.at(k, y, x) = n[k] / len;
      }
  }
  return img;
}

LatentImage load_latent(const std::string& path, Role role) {
  return to_latent(io::load_map(path), role, !io::is_tensor_file(path));
}

Tensor to_map(const LatentImage& img) {
  std::vector<double> v(img.channels * img.height * img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) v[(y * img.width + x) * img.channels + c] = img.at(c, y, x);
  if (img.channels == 1) return Tensor({img.height, img.width}, std::move(v));
  return Tensor({img.height, img.width, img.channels}, std::move(v));
}

bool wants_image(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  return ext == ".pgm" || ext == ".ppm";
}

void save_map(const std::string& path, const Tensor& map) {
  if (wants_image(path))
    io::write_pnm(path, io::tensor_to_image(map));
  else
    io::save_tensor(path, map);
}

std::vector<Tensor> load_dir_maps(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("input directory " + dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Tensor> maps;
  for (const fs::path& f : files) maps.push_back(io::load_map(f));
  if (maps.empty()) throw UsageError("input directory " + dir + " holds no maps");
  return maps;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  Common common;
  bool synthetic = false;
  std::string data_dir;
  std::string save_data;
  std::string init;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  bool frozen_base = false;
};

int cmd_train(const TrainArgs& args) {
  config::RunConfig rc = load_config(args.common);
  if (args.steps) rc.set("train_steps", std::to_string(*args.steps));
  if (args.seed) rc.set("seed", std::to_string(*args.seed));
  if (args.lr) rc.set("learning_rate", io::format_double(*args.lr));
  if (args.frozen_base) rc.set("frozen_base", "true");
  if (args.synthetic == !args.data_dir.empty()) throw UsageError("train needs exactly one of --synthetic or --data");

  const ModelConfig cfg = rc.model();
  const std::uint64_t seed = rc.integer("seed");
  const ToyDataset data = args.synthetic
                              ? make_synthetic_dataset(rc.integer("dataset_size"), cfg.grid_h, cfg.grid_w, seed)
                              : load_dataset(args.data_dir);
  if (!args.save_data.empty()) save_dataset(args.save_data, data);

  ModelState state = ModelState::init(cfg, seed);
  if (!args.init.empty()) {
    state = load_checkpoint(args.init);
    // the learning rate is a training knob, not part of the architecture
    state.cfg.learning_rate = cfg.learning_rate;
    if (config::model_entries(state.cfg) != config::model_entries(cfg))
      throw ConfigError("--init checkpoint was built with a different model configuration");
  }
  for (Condition c : kConditions) {
    const std::string key = "strength_" + std::string(condition_name(c));
    if (rc.is_set(key)) state = with_strength(std::move(state), c, rc.real(key));
  }

  TrainOptions opts;
  opts.steps = rc.integer("train_steps");
  opts.learning_rate = cfg.learning_rate;
  opts.frozen_base = rc.flag("frozen_base");
  opts.seed = seed;

  auto write_losses = [&](const std::vector<double>& losses) {
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) csv += std::to_string(i) + "," + io::format_double(losses[i]) + "\n";
    io::write_file(fs::path(args.out) / "loss.csv", csv);
  };
  TrainResult result;
  try {
    result = train(state, data, opts);
  } catch (const TrainingDiverged& e) {
    write_losses(e.losses);
    throw;
  }
  save_checkpoint(args.out, state);
  write_losses(result.losses);
  if (!result.losses.empty())
    std::printf("steps=%zu initial_loss=%.6g final_loss=%.6g\n", result.losses.size(),
                initial_smoothed(result.losses, 100), final_smoothed(result.losses, 100));
  else
    std::printf("steps=0\n");
  return 0;
}

// ---- sample ------------------------------------------------------------------

struct SampleArgs {
  Common common;
  std::string checkpoint;
  std::string material, depth, normal, lighting;
  std::optional<std::size_t> synthetic_index;
  std::uint64_t data_seed = 0;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string cache;
  bool cache_material = false;
  std::optional<double> strength[kConditionCount];
  std::vector<std::string> drop;
  std::string out;
};

int cmd_sample(const SampleArgs& args) {
  config::RunConfig rc = load_config(args.common);
  if (args.steps) rc.set("num_steps", std::to_string(*args.steps));
  if (args.seed) rc.set("seed", std::to_string(*args.seed));
  if (!args.cache.empty()) rc.set("cache", args.cache);
  if (args.cache_material) rc.set("cache_material", "true");
  for (Condition c : kConditions)
    if (args.strength[static_cast<std::size_t>(c)])
      rc.set("strength_" + std::string(condition_name(c)),
             io::format_double(*args.strength[static_cast<std::size_t>(c)]));

  ModelState state = load_checkpoint(args.checkpoint);
  for (Condition c : kConditions) {
    const std::string key = "strength_" + std::string(condition_name(c));
    if (rc.is_set(key)) state = with_strength(std::move(state), c, rc.real(key));
  }

  std::array<bool, kConditionCount> dropped{};
  for (const std::string& name : args.drop) {
    const auto c = parse_condition(name);
    if (!c) throw UsageError("--drop-condition expects depth, normal or lighting, got '" + name + "'");
    dropped[static_cast<std::size_t>(*c)] = true;
  }

  ConditionImages images;
  if (args.synthetic_index) {
    const ToyDataset ds = make_synthetic_dataset(*args.synthetic_index + 1, state.cfg.grid_h, state.cfg.grid_w,
                                                 args.data_seed);
    images = ds.samples.back().conditions();
  } else {
    if (args.material.empty()) throw UsageError("sample needs --material (or --synthetic-index)");
    images.material = load_latent(args.material, Role::material);
    const std::string* paths[kConditionCount] = {&args.depth, &args.normal, &args.lighting};
    for (Condition c : kConditions) {
      const std::string& p = *paths[static_cast<std::size_t>(c)];
      if (!p.empty()) images.cond(c) = load_latent(p, condition_role(c));
    }
  }
  for (Condition c : kConditions) {
    if (dropped[static_cast<std::size_t>(c)]) {
      images.cond(c).reset();
    } else if (!images.cond(c)) {
      throw UsageError("missing --" + std::string(condition_name(c)) + " input; pass it or --drop-condition " +
                       std::string(condition_name(c)));
    }
  }

  const ConditionPatches patches = patchify_conditions(images, state.cfg);
  const FlowConfig flow = rc.flow();
  CacheOptions cache_opts;
  cache_opts.cache_material = rc.flag("cache_material");
  const Tensor tokens = rc.flag("cache") ? sample_cached(state, patches, flow, nullptr, cache_opts)
                                         : sample_uncached(state, patches, flow);
  const LatentImage out =
      unpatchify(tokens, Role::noise, state.cfg.grid_h, state.cfg.grid_w, state.cfg.patch_size);
  save_map(args.out, to_map(out));
  return 0;
}

// ---- verify ------------------------------------------------------------------

int cmd_verify(bool list, const std::string& only) {
  const std::vector<const checks::Check*> chosen = checks::select(only);
  if (chosen.empty()) throw UsageError("no check or group named '" + only + "'");
  if (list) {
    for (const checks::Check* c : chosen) std::printf("%-30s %s\n", c->name.c_str(), c->summary.c_str());
    return 0;
  }
  std::size_t failed = 0;
  for (const checks::Check* c : chosen) {
    checks::CheckResult r;
    try {
      r = c->run();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += !r.passed;
    std::printf("%s %s%s%s\n", r.passed ? "PASS" : "FAIL", c->name.c_str(), r.detail.empty() ? "" : ": ",
                r.detail.c_str());
  }
  std::printf("%zu/%zu checks passed\n", chosen.size() - failed, chosen.size());
  return failed == 0 ? 0 : kExitVerify;
}

// ---- bench-kv ----------------------------------------------------------------

int cmd_bench_kv(const Common& common, std::optional<std::size_t> steps, std::optional<std::size_t> runs,
                 std::optional<std::uint64_t> seed) {
  config::RunConfig rc = load_config(common);
  if (steps) rc.set("num_steps", std::to_string(*steps));
  if (seed) rc.set("seed", std::to_string(*seed));
  if (runs) rc.set("bench_runs", std::to_string(*runs));
  const std::size_t n_runs = rc.integer("bench_runs");
  if (n_runs == 0) throw ConfigError("bench_runs must be at least 1");

  const ModelConfig cfg = rc.model();
  const FlowConfig flow = rc.flow();
  const ModelState state = ModelState::init(cfg, flow.seed);
  const ToyDataset ds = make_synthetic_dataset(1, cfg.grid_h, cfg.grid_w, flow.seed);
  const ConditionPatches conds = patchify_conditions(ds.samples.front().conditions(), cfg);
  CacheOptions cache_opts;
  cache_opts.cache_material = rc.flag("cache_material");

  auto time_ms = [](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  Tensor cached, uncached;
  // Warm-up run of each path before timing.
  cached = sample_cached(state, conds, flow, nullptr, cache_opts);
  uncached = sample_uncached(state, conds, flow);
  std::vector<double> cached_ms, uncached_ms;
  for (std::size_t r = 0; r < n_runs; ++r) {
    uncached_ms.push_back(time_ms([&] { uncached = sample_uncached(state, conds, flow); }));
    cached_ms.push_back(time_ms([&] { cached = sample_cached(state, conds, flow, nullptr, cache_opts); }));
  }
  double maxdiff = 0.0;
  for (std::size_t i = 0; i < cached.numel(); ++i)
    maxdiff = std::max(maxdiff, std::abs(cached.data()[i] - uncached.data()[i]));
  const double c = median(cached_ms), u = median(uncached_ms);
  std::printf("steps=%zu cached_ms=%.3f uncached_ms=%.3f speedup=%.3f maxdiff=%.3g\n", flow.num_steps, c, u, u / c,
              maxdiff);
  return 0;
}

// ---- ensembles ---------------------------------------------------------------

int cmd_depth_align(const Common& common, const std::string& in, std::optional<double> lambda,
                    std::optional<std::size_t> iters, std::optional<std::uint64_t> seed, const std::string& out) {
  config::RunConfig rc = load_config(common);
  if (lambda) rc.set("lambda_reg", io::format_double(*lambda));
  if (iters) rc.set("align_iters", std::to_string(*iters));
  if (seed) rc.set("seed", std::to_string(*seed));

  DepthPredictionSet preds;
  for (const Tensor& m : load_dir_maps(in))
    preds.push_back(m.rank() == 2 ? m : to_map(to_latent(m, Role::depth, false)));
  Rng rng(rc.integer("seed"));
  const AlignResult r = align_depth(preds, rc.real("lambda_reg"), rc.integer("align_iters"), rng);
  std::printf("objective=%s initial=%s\n", io::format_double(r.objective).c_str(),
              io::format_double(r.initial_objective).c_str());
  for (std::size_t i = 0; i < r.params.size(); ++i)
    std::printf("map=%zu scale=%s offset=%s\n", i, io::format_double(r.params.scale[i]).c_str(),
                io::format_double(r.params.offset[i]).c_str());
  if (!out.empty()) save_map(out, merge_depth(preds, r.params));
  return 0;
}

int cmd_normal_ensemble(const std::string& in, const std::string& out) {
  NormalPredictionSet preds;
  const std::vector<Tensor> maps = load_dir_maps(in);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (std::size_t i = 0; i < maps.size(); ++i)
    preds.push_back(to_map(to_latent(maps[i], Role::normal, !io::is_tensor_file(files[i]))));
  const Tensor merged = ensemble_normals(preds);
  if (wants_image(out)) {
    std::vector<double> v = merged.to_vector();
    for (double& x : v) x = 0.5 * (x + 1.0);
    io::write_pnm(out, io::tensor_to_image(Tensor(merged.shape(), std::move(v))));
  } else {
    io::save_tensor(out, merged);
  }
  return 0;
}

int cmd_light_decompose(const std::string& image, const std::string& albedo, const std::string& shading,
                        const std::string& residual, bool rebuild, const std::string& out) {
  const Tensor a = io::load_map(albedo);
  const Tensor l = io::load_map(shading);
  if (rebuild) {
    if (out.empty()) throw UsageError("--reconstruct needs --out");
    save_map(out, reconstruct(a, l, io::load_map(residual)));
    return 0;
  }
  if (image.empty()) throw UsageError("light-decompose needs --image (or --reconstruct)");
  // The residual can be negative, so it is always stored as a tensor file.
  io::save_tensor(residual, lighting_residual(io::load_map(image), a, l));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shaderflow: desk-scale multi-condition rectified-flow transformer"};
  app.require_subcommand(1);
  app.footer("\n" + config::keys_help() +
             "\nrandomness: xoshiro256** seeded through splitmix64; normals by Box-Muller.\n"
             "exit codes: 0 ok, 2 usage or config, 3 numeric failure, 4 verify failure\n");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train on the synthetic task or a dataset directory");
  add_common(train_cmd, train_args.common);
  train_cmd->add_flag("--synthetic", train_args.synthetic, "generate the synthetic dataset");
  train_cmd->add_option("--data", train_args.data_dir, "dataset directory (sample_NNNN/*.tensor)");
  train_cmd->add_option("--save-data", train_args.save_data, "also write the dataset here");
  train_cmd->add_option("--init", train_args.init, "start from this checkpoint");
  train_cmd->add_option("--out", train_args.out, "checkpoint directory")->required();
  train_cmd->add_option("--steps", train_args.steps, "SGD steps (train_steps)");
  train_cmd->add_option("--seed", train_args.seed, "seed");
  train_cmd->add_option("--lr", train_args.lr, "learning rate (learning_rate)");
  train_cmd->add_flag("--frozen-base", train_args.frozen_base, "update LoRA adapters only");

  SampleArgs sample_args;
  CLI::App* sample_cmd = app.add_subcommand("sample", "sample an image from a checkpoint");
  add_common(sample_cmd, sample_args.common);
  sample_cmd->add_option("--checkpoint", sample_args.checkpoint, "checkpoint directory")->required();
  sample_cmd->add_option("--material", sample_args.material, "material map (PPM or tensor)");
  sample_cmd->add_option("--depth", sample_args.depth, "depth map (PGM or tensor)");
  sample_cmd->add_option("--normal", sample_args.normal, "normal map (PPM or tensor)");
  sample_cmd->add_option("--lighting", sample_args.lighting, "lighting map (PGM or tensor)");
  sample_cmd->add_option("--synthetic-index", sample_args.synthetic_index, "use synthetic sample K as input");
  sample_cmd->add_option("--data-seed", sample_args.data_seed, "seed the synthetic dataset was built with")->capture_default_str();
  sample_cmd->add_option("--steps", sample_args.steps, "Euler steps (num_steps)");
  sample_cmd->add_option("--seed", sample_args.seed, "seed for the initial noise");
  sample_cmd->add_option("--cache", sample_args.cache, "on|off (cache)")->check(CLI::IsMember({"on", "off"}));
  sample_cmd->add_flag("--cache-material", sample_args.cache_material, "also cache first-block material K/V");
  sample_cmd->add_option("--strength-depth", sample_args.strength[0], "depth adapter strength");
  sample_cmd->add_option("--strength-normal", sample_args.strength[1], "normal adapter strength");
  sample_cmd->add_option("--strength-lighting", sample_args.strength[2], "lighting adapter strength");
  sample_cmd->add_option("--drop-condition", sample_args.drop, "leave a condition out (repeatable)");
  sample_cmd->add_option("--out", sample_args.out, "output (.ppm or tensor file)")->required();

  bool verify_list = false;
  std::string verify_only;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the property checks");
  verify_cmd->add_flag("--list", verify_list, "list checks instead of running them");
  verify_cmd->add_option("--only", verify_only, "run one group (e.g. scma) or one check");

  Common bench_common;
  std::optional<std::size_t> bench_steps, bench_runs;
  std::optional<std::uint64_t> bench_seed;
  CLI::App* bench_cmd = app.add_subcommand("bench-kv", "time cached vs uncached sampling");
  add_common(bench_cmd, bench_common);
  bench_cmd->add_option("--steps", bench_steps, "Euler steps (num_steps)");
  bench_cmd->add_option("--runs", bench_runs, "timed runs per mode (bench_runs)");
  bench_cmd->add_option("--seed", bench_seed, "seed");

  Common depth_common;
  std::string depth_in, depth_out;
  std::optional<double> depth_lambda;
  std::optional<std::size_t> depth_iters;
  std::optional<std::uint64_t> depth_seed;
  CLI::App* depth_cmd = app.add_subcommand("depth-align", "align and merge depth predictions");
  add_common(depth_cmd, depth_common);
  depth_cmd->add_option("--in", depth_in, "directory of depth maps")->required();
  depth_cmd->add_option("--lambda", depth_lambda, "range regularizer weight (lambda_reg)");
  depth_cmd->add_option("--iters", depth_iters, "optimizer iterations (align_iters)");
  depth_cmd->add_option("--seed", depth_seed, "seed");
  depth_cmd->add_option("--out", depth_out, "merged map (.pgm or tensor file)");

  std::string normal_in, normal_out;
  CLI::App* normal_cmd = app.add_subcommand("normal-ensemble", "pick per-pixel normals closest to the mean");
  normal_cmd->add_option("--in", normal_in, "directory of normal maps")->required();
  normal_cmd->add_option("--out", normal_out, "merged map (.ppm or tensor file)")->required();

  std::string light_image, light_albedo, light_shading, light_residual = "residual.tensor", light_out;
  bool light_rebuild = false;
  CLI::App* light_cmd = app.add_subcommand("light-decompose", "split an image into A * l + R, or rebuild it");
  light_cmd->add_option("--image", light_image, "image I");
  light_cmd->add_option("--albedo", light_albedo, "albedo A")->required();
  light_cmd->add_option("--shading", light_shading, "shading l (one channel or matching A)")->required();
  light_cmd->add_option("--residual", light_residual, "residual R tensor file")->capture_default_str();
  light_cmd->add_flag("--reconstruct", light_rebuild, "rebuild I from A, l and R");
  light_cmd->add_option("--out", light_out, "rebuilt image (.ppm/.pgm or tensor file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (sample_cmd->parsed()) return cmd_sample(sample_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_list, verify_only);
    if (bench_cmd->parsed()) return cmd_bench_kv(bench_common, bench_steps, bench_runs, bench_seed);
    if (depth_cmd->parsed())
      return cmd_depth_align(depth_common, depth_in, depth_lambda, depth_iters, depth_seed, depth_out);
    if (normal_cmd->parsed()) return cmd_normal_ensemble(normal_in, normal_out);
    if (light_cmd->parsed())
      return cmd_light_decompose(light_image, light_albedo, light_shading, light_residual, light_rebuild, light_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
