// Copyright 2026 The shaderflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "shaderflow/attention.hpp"
#include "shaderflow/checks.hpp"

using namespace shaderflow;

TEST_CASE("every registered check passes on this build") {
  const auto& all = checks::registry();
  CHECK(all.size() >= 30);
  std::set<std::string> names;
  for (const checks::Check& c : all) {
    CHECK(names.insert(c.name).second);
    CHECK(c.name.rfind(c.group + ".", 0) == 0);
    CHECK_FALSE(c.summary.empty());
    const checks::CheckResult r = c.run();
    CHECK_MESSAGE(r.passed, c.name << ": " << r.detail);
  }
}

TEST_CASE("selection by group or full name") {
  const auto scma = checks::select("scma");
  REQUIRE_FALSE(scma.empty());
  for (const checks::Check* c : scma) CHECK(c->group == "scma");
  const auto one = checks::select("kvcache.equivalence");
  REQUIRE(one.size() == 1);
  CHECK(one[0]->name == "kvcache.equivalence");
  CHECK(checks::select("").size() == checks::registry().size());
  CHECK(checks::select("nonsense").empty());
}

TEST_CASE("a flipped block rule is caught by the structure property") {
  CHECK(checks::scma_structure(build_scma_mask).passed);

  // Condition rows open to the image blocks, image rows closed to conditions.
  const checks::MaskBuilder flipped = [](const BranchLayout& layout) {
    AttentionMask m = build_scma_mask(layout);
    for (std::size_t i = 0; i < layout.total(); ++i)
      for (std::size_t j = 0; j < layout.total(); ++j) {
        const bool image_i = layout.block_of(i) < 2, image_j = layout.block_of(j) < 2;
        if (image_i != image_j) {
          if (m.allows(i, j))
            m.block(i, j);
          else
            m.allow(i, j);
        }
      }
    return m;
  };
  const checks::CheckResult r = checks::scma_structure(flipped);
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.detail.empty());

  // Conditions that see each other (the literal matrix reading) are also caught.
  const checks::MaskBuilder leaky = [](const BranchLayout& layout) {
    AttentionMask m = build_scma_mask(layout);
    for (std::size_t i = layout.image_tokens(); i < layout.total(); ++i)
      for (std::size_t j = layout.image_tokens(); j < layout.total(); ++j) m.allow(i, j);
    return m;
  };
  CHECK_FALSE(checks::scma_structure(leaky).passed);
}
