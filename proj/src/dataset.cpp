// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "shaderflow/errors.hpp"
#include "shaderflow/io.hpp"
#include "shaderflow/model.hpp"
#include "shaderflow/random.hpp"

namespace shaderflow {
namespace {

constexpr std::array<Role, 5> kSampleRoles{Role::material, Role::depth, Role::normal, Role::lighting, Role::noise};

std::string role_file(Role r) { return std::string(r == Role::noise ? "target" : role_name(r)) + ".tensor"; }

ToySample make_sample(std::size_t h, std::size_t w, Rng& rng) {
  ToySample s;
  s.material = LatentImage::zeros(Role::material, h, w);
  s.depth = LatentImage::zeros(Role::depth, h, w);
  s.normal = LatentImage::zeros(Role::normal, h, w);
  s.lighting = LatentImage::zeros(Role::lighting, h, w);
  s.target = LatentImage::zeros(Role::noise, h, w);

  std::array<double, 3> color{};
  for (double& c : color) c = rng.uniform(0.2, 1.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        s.material.at(c, y, x) = std::clamp(color[c] + 0.05 * rng.normal(), 0.0, 1.0);
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) mean[c] += s.material.at(c, y, x);
    mean[c] /= static_cast<double>(h * w);
  }

  // A round object nearer than the background: depth < 0.5 inside the disk.
  const double cy = rng.uniform(0.25, 0.75) * static_cast<double>(h);
  const double cx = rng.uniform(0.25, 0.75) * static_cast<double>(w);
  const double radius = rng.uniform(0.2, 0.4) * static_cast<double>(std::min(h, w));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dist = std::hypot(static_cast<double>(y) + 0.5 - cy, static_cast<double>(x) + 0.5 - cx);
      s.depth.at(0, y, x) = std::clamp(0.5 * dist / radius, 0.0, 1.0);
    }

  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      auto depth_at = [&](long yy, long xx) {
        yy = std::clamp(yy, 0L, static_cast<long>(h) - 1);
        xx = std::clamp(xx, 0L, static_cast<long>(w) - 1);
        return s.depth.at(0, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
      };
      const long iy = static_cast<long>(y), ix = static_cast<long>(x);
      const double gx = 0.5 * (depth_at(iy, ix + 1) - depth_at(iy, ix - 1));
      const double gy = 0.5 * (depth_at(iy + 1, ix) - depth_at(iy - 1, ix));
      const double nx = -4.0 * gx, ny = -4.0 * gy, nz = 1.0;
      const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
      s.normal.at(0, y, x) = nx / norm;
      s.normal.at(1, y, x) = ny / norm;
      s.normal.at(2, y, x) = nz / norm;
    }

  const double base = rng.uniform(0.5, 1.0);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double slope = rng.uniform(0.0, 0.5);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w) - 0.5;
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h) - 0.5;
      s.lighting.at(0, y, x) = std::max(0.0, base + slope * (u * std::cos(angle) + v * std::sin(angle)));
    }

  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        s.target.at(c, y, x) = s.depth.at(0, y, x) < 0.5 ? mean[c] * s.lighting.at(0, y, x) : 0.0;
  return s;
}

Tensor image_tensor(const LatentImage& img) {
  return Tensor({img.channels, img.height, img.width}, img.data);
}

LatentImage tensor_image(const Tensor& t, Role role) {
  if (t.rank() != 3) throw IoError("dataset: expected a [C x H x W] tensor for " + std::string(role_name(role)));
  return LatentImage{role, t.shape()[0], t.shape()[1], t.shape()[2], t.to_vector()};
}

LatentImage& member(ToySample& s, Role r) {
  switch (r) {
    case Role::material: return s.material;
    case Role::depth: return s.depth;
    case Role::normal: return s.normal;
    case Role::lighting: return s.lighting;
    case Role::noise: break;
  }
  return s.target;
}

}  // namespace

ConditionImages ToySample::conditions() const {
  ConditionImages c;
  c.material = material;
  c.cond(Condition::depth) = depth;
  c.cond(Condition::normal) = normal;
  c.cond(Condition::lighting) = lighting;
  return c;
}

ToyDataset make_synthetic_dataset(std::size_t count, std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  ToyDataset ds;
  for (std::size_t i = 0; i < count; ++i) ds.samples.push_back(make_sample(height, width, rng));
  return ds;
}

void save_dataset(const std::string& dir, const ToyDataset& dataset) {
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu", i);
    ToySample sample = dataset.samples[i];
    for (Role r : kSampleRoles)
      io::save_tensor(std::filesystem::path(dir) / name / role_file(r), image_tensor(member(sample, r)));
  }
}

ToyDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir + " does not exist");
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  ToyDataset ds;
  for (const fs::path& p : entries) {
    ToySample s;
    for (Role r : kSampleRoles) member(s, r) = tensor_image(io::load_tensor(p / role_file(r)), r);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw IoError("dataset directory " + dir + " holds no samples");
  return ds;
}

}  // namespace shaderflow
