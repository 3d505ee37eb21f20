#pragma once

#include "riot/engine.hpp"
#include "riot/mock_provider.hpp"

#include "test_support.hpp"

#include <optional>

namespace riot::testing {

inline constexpr const char *kMathPrompt =
    "You will answer a mathematical reasoning question. Think step by step. The last line of your response should "
    "be of the following format: 'Answer: $VALUE' where VALUE is a numerical value.";

/// One seeded mock serving every role, wired like the command-line tool does it.
struct MockRun {
  riot::Dataset data;
  riot::MockProvider mock;
  riot::EmbeddingCache cache;
  riot::EngineResources res;
  riot::RunConfig config;

  explicit MockRun(std::uint64_t seed, std::size_t train = 20) : data(riot::testing::synthetic_dataset(train, 10, 10)), mock(seed) {
    mock.set_answer_key(riot::make_answer_key(data));
    res.ctx.target = &mock;
    res.ctx.optimizer = &mock;
    res.ctx.answer_spec = data.answer_spec;
    res.ctx.parallelism = 4;
    res.embedder = &mock;
    res.scorer = &mock;
    res.embedding_cache = &cache;
    config.initial_prompt = kMathPrompt;
    config.seed = seed;
  }

  riot::RunReport go(std::optional<riot::OptimizationTree> resume = std::nullopt, riot::RunHooks hooks = {}) {
    return riot::run(config, data, res, std::move(resume), hooks);
  }
};

} // namespace riot::testing
