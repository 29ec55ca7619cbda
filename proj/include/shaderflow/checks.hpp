// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "shaderflow/attention.hpp"

namespace shaderflow::checks {

struct CheckResult {
  bool passed = true;
  std::string detail;
};

struct Check {
  std::string name;   // e.g. "scma.structure"
  std::string group;  // the part before the first '.'
  std::string summary;
  std::function<CheckResult()> run;
};

// Every property check `verify` knows about, in a fixed order.
const std::vector<Check>& registry();

// Checks whose group equals `group`, or whose full name equals it.
std::vector<const Check*> select(std::string_view group);

using MaskBuilder = std::function<AttentionMask(const BranchLayout&)>;

// Mask structure for every layout with block sizes in {0..max_block}^5,
// against a brute-force membership rule. Takes the builder so a broken one
// can be substituted.
CheckResult scma_structure(const MaskBuilder& build, std::size_t max_block = 4);

}  // namespace shaderflow::checks
