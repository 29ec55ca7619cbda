// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

namespace shaderflow {

// xoshiro256** seeded through splitmix64. All randomness in the project comes
// from here so traces are reproducible in any language:
//
//   seeding:  z += 0x9e3779b97f4a7c15;
//             z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
//             z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
//             s[i] = z ^ (z >> 31)          for i = 0..3
//   next:     result = rotl(s1 * 5, 7) * 9;
//             t = s1 << 17;
//             s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//   uniform:  (next() >> 11) * 2^-53                       in [0, 1)
//   normal:   Box-Muller on u1 = 1 - uniform(), u2 = uniform():
//             r = sqrt(-2 ln u1); returns r cos(2 pi u2), then r sin(2 pi u2)
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  // Independent child stream derived from the next output.
  Rng split();

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace shaderflow
