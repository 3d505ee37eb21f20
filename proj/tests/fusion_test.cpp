#include "riot/fusion.hpp"
#include "riot/mock_provider.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

using namespace riot::oracles;

namespace {

riot::MockProvider mock_with(const Overrides &vectors) {
  riot::MockProvider mock(0);
  mock.set_embedding_overrides(vectors);
  return mock;
}

} // namespace

TEST(Fusion, HandBuiltExampleKeepsS1AndR2) {
  auto mock = mock_with({{"S1 text.", {1, 0, 0}}, {"S2 text.", {0, 1, 0}}, {"R1 text.", {1, 0, 0}}, {"R2 text.", {0, 0, 1}}});
  const auto r = riot::fuse("S1 text. S2 text.", "R1 text. R2 text.", {0.25, 0.5}, mock);
  EXPECT_EQ(r.fused_prompt, "S1 text. R2 text.");
  EXPECT_EQ(indices(r.trace.kept_parent), (std::set<std::size_t>{0}));
  EXPECT_EQ(indices(r.trace.dropped_parent), (std::set<std::size_t>{1}));
  EXPECT_EQ(indices(r.trace.kept_child), (std::set<std::size_t>{1}));
  EXPECT_EQ(indices(r.trace.dropped_child), (std::set<std::size_t>{0}));
  EXPECT_DOUBLE_EQ(r.trace.parent_threshold, 0.75);
  EXPECT_DOUBLE_EQ(r.trace.child_threshold, 0.5);
  EXPECT_DOUBLE_EQ(*r.trace.kept_parent[0].max_similarity, 1.0);
  EXPECT_DOUBLE_EQ(*r.trace.dropped_parent[0].max_similarity, 0.0);
}

TEST(Fusion, ExtremeThresholdsKeepOnlyPerfectParentMatches) {
  auto mock = mock_with({{"S1 text.", {1, 0, 0}}, {"S2 text.", {0, 1, 0}}, {"R1 text.", {1, 0, 0}}, {"R2 text.", {0, 0, 1}}});
  const auto r = riot::fuse("S1 text. S2 text.", "R1 text. R2 text.", {0.0, 1.0}, mock);
  EXPECT_EQ(r.fused_prompt, "S1 text.");
  EXPECT_TRUE(r.trace.kept_child.empty());
}

TEST(Fusion, EmptyParentReturnsChildVerbatim) {
  riot::MockProvider mock(0);
  const auto r = riot::fuse("", "X.", {}, mock);
  EXPECT_EQ(r.fused_prompt, "X.");
  EXPECT_EQ(r.trace.outcome, riot::FusionOutcome::EmptyParent);
  EXPECT_TRUE(r.trace.kept_parent.empty());
  EXPECT_TRUE(r.trace.dropped_parent.empty());
  ASSERT_EQ(r.trace.kept_child.size(), 1u);
  EXPECT_FALSE(r.trace.kept_child[0].max_similarity.has_value());
}

TEST(Fusion, EmptyChildReturnsParent) {
  riot::MockProvider mock(0);
  const auto r = riot::fuse("Keep me.", "  ", {}, mock);
  EXPECT_EQ(r.fused_prompt, "Keep me.");
  EXPECT_EQ(r.trace.outcome, riot::FusionOutcome::EmptyChild);
}

TEST(Fusion, NothingKeptFallsBackToChild) {
  // b1 = 0 demands an exact parent match; b2 = 1 admits only negative-similarity child sentences.
  auto mock = mock_with({{"A one.", {1, 0}}, {"B one.", {0.6, 0.8}}});
  const auto r = riot::fuse("A one.", "B one.", {0.0, 1.0}, mock);
  EXPECT_EQ(r.trace.outcome, riot::FusionOutcome::NothingKept);
  EXPECT_EQ(r.fused_prompt, "B one.");
}

TEST(Fusion, RejectsThresholdsOutsideUnitInterval) {
  riot::MockProvider mock(0);
  EXPECT_THROW((void)riot::fuse("A.", "B.", {1.2, 0.5}, mock), riot::Error);
  EXPECT_THROW((void)riot::fuse("A.", "B.", {0.5, -0.1}, mock), riot::Error);
}

TEST(Fusion, ProvenanceEveryOutputSentenceComesFromAnInput) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto c = make_case(rng);
    auto mock = mock_with(c.vectors);
    const auto r = riot::fuse(c.parent_text(), c.child_text(), {0.3, 0.4}, mock);
    std::set<std::string> inputs(c.parent.begin(), c.parent.end());
    inputs.insert(c.child.begin(), c.child.end());
    for (const auto &s : riot::split_sentences(r.fused_prompt)) {
      EXPECT_TRUE(inputs.contains(s.text)) << s.text;
    }
    EXPECT_EQ(r.trace.kept_parent.size() + r.trace.dropped_parent.size(), c.parent.size());
    EXPECT_EQ(r.trace.kept_child.size() + r.trace.dropped_child.size(), c.child.size());
  }
}

TEST(Fusion, OutputOrderIsParentThenChild) {
  auto mock = mock_with({{"P a.", {1, 0}}, {"P b.", {1, 0}}, {"C a.", {1, 0}}, {"C b.", {0, 1}}, {"C c.", {-1, 0}}});
  const auto r = riot::fuse("P a. P b.", "C a. C b. C c.", {0.25, 0.5}, mock);
  EXPECT_EQ(r.fused_prompt, "P a. P b. C b. C c.");
}

TEST(Fusion, MatchesPairwiseOracleOnThousandRandomCases) {
  std::mt19937_64 rng(20241019);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const auto c = make_case(rng);
    const double b1 = unit(rng);
    const double b2 = unit(rng);
    auto mock = mock_with(c.vectors);
    const auto r = riot::fuse(c.parent_text(), c.child_text(), {b1, b2}, mock);
    const auto expect = oracle(c, b1, b2);
    ASSERT_EQ(indices(r.trace.kept_parent), expect.kept_parent) << "case " << t;
    ASSERT_EQ(indices(r.trace.kept_child), expect.kept_child) << "case " << t;
  }
}

TEST(Fusion, ThresholdSweepsAreMonotone) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto c = make_case(rng);
    auto mock = mock_with(c.vectors);
    riot::EmbeddingCache cache;
    std::set<std::size_t> previous_parent;
    std::set<std::size_t> previous_child;
    for (int s = 0; s <= 20; ++s) {
      const double b = s / 20.0;
      const auto r1 = riot::fuse(c.parent_text(), c.child_text(), {b, 0.5}, mock, &cache);
      const auto kp = indices(r1.trace.kept_parent);
      EXPECT_TRUE(std::includes(kp.begin(), kp.end(), previous_parent.begin(), previous_parent.end()));
      previous_parent = kp;

      const auto r2 = riot::fuse(c.parent_text(), c.child_text(), {0.25, b}, mock, &cache);
      const auto kc = indices(r2.trace.kept_child);
      if (s > 0) {
        EXPECT_TRUE(std::includes(previous_child.begin(), previous_child.end(), kc.begin(), kc.end()));
      }
      previous_child = kc;
    }
  }
}

TEST(Fusion, TraceSurvivesJsonRoundTrip) {
  auto mock = mock_with({{"S1 text.", {1, 0, 0}}, {"S2 text.", {0, 1, 0}}, {"R1 text.", {1, 0, 0}}, {"R2 text.", {0, 0, 1}}});
  const auto r = riot::fuse("S1 text. S2 text.", "R1 text. R2 text.", {}, mock);
  const auto back = riot::fusion_trace_from_json(riot::to_json(r.trace));
  EXPECT_EQ(back.kept_parent, r.trace.kept_parent);
  EXPECT_EQ(back.dropped_child, r.trace.dropped_child);
  EXPECT_EQ(back.outcome, r.trace.outcome);
}

TEST(FusionLlm, ReturnsCannedMerge) {
  riot::MockProvider mock(1);
  mock.set_canned_response("merged prompt");
  EXPECT_EQ(riot::fuse_llm("A.", "B.", mock, riot::default_fusion_template()), "merged prompt");
}

TEST(FusionLlm, EmptyParentSkipsTheModel) {
  riot::testing::ScriptedProvider p;
  int calls = 0;
  p.on_chat = [&](auto, auto) {
    ++calls;
    return std::string("unused");
  };
  EXPECT_EQ(riot::fuse_llm("", "Child only.", p, riot::default_fusion_template()), "Child only.");
  EXPECT_EQ(calls, 0);
}

TEST(FusionLlm, RenderedTemplateCarriesBothPrompts) {
  riot::testing::ScriptedProvider p;
  std::string seen;
  p.on_chat = [&](std::span<const riot::Message> m, auto) {
    seen = m.back().content;
    return std::string("Merged.");
  };
  EXPECT_EQ(riot::fuse_llm("Parent says hi.", "Child says bye.", p, riot::default_fusion_template()), "Merged.");
  EXPECT_NE(seen.find("<parent>\nParent says hi.\n</parent>"), std::string::npos);
  EXPECT_NE(seen.find("<child>\nChild says bye.\n</child>"), std::string::npos);
  EXPECT_EQ(seen.find("{parent}"), std::string::npos);
}

TEST(FusionLlm, BlankReplyIsAnError) {
  riot::MockProvider mock(1);
  mock.set_canned_response("   ");
  try {
    (void)riot::fuse_llm("A.", "B.", mock, riot::default_fusion_template());
    FAIL();
  } catch (const riot::Error &e) {
    EXPECT_EQ(e.kind(), riot::ErrorKind::EmptyCompletion);
  }
}
