#pragma once

// Mirrors the files under assets/. tests/assets_test.cpp keeps the two in sync.

#include <array>
#include <optional>
#include <string_view>

namespace riot::assets {

inline constexpr std::string_view kGradientTemplate = R"riot(You are reviewing a system prompt that instructs a language model to solve a task.

<prompt>
{prompt}
</prompt>

The model was run with this prompt on a training batch and reached an accuracy of {accuracy}.
Below are the samples it answered incorrectly, each with the question, the model's answer and the expected answer.

<failures>
{failures}
</failures>

Write a concise critique of the prompt. Explain which instructions led to the errors above and how the prompt should change so the model answers such questions correctly. If there are no failures, point out what could still make the prompt more robust. Do not rewrite the prompt yourself.
)riot";

inline constexpr std::string_view kProposalTemplate = R"riot(You are improving a system prompt for a language model.

<prompt>
{prompt}
</prompt>

Here is feedback on the current prompt:

<feedback>
{gradient}
</feedback>

Write an improved version of the prompt that addresses the feedback while keeping the required output format. Return only the full revised prompt text, with no commentary, no quotes and no markdown.

Variant: {nonce}
)riot";

inline constexpr std::string_view kFusionTemplate = R"riot(You merge two versions of a system prompt into one.

## Task specification
You receive a PARENT prompt and a CHILD prompt. The child is a revision of the parent. Produce a single merged prompt that keeps the parent instructions that are still relevant and adds the new instructions introduced by the child.

## Constraints
- Keep every output-format requirement exactly as written.
- Do not invent instructions that appear in neither prompt.
- Remove sentences that repeat the same instruction.
- Output only the merged prompt text.

## Example
PARENT: You will answer a reasoning question. Think step by step.
CHILD: You will answer a reasoning question. List every object before counting.
MERGED: You will answer a reasoning question. Think step by step. List every object before counting.

## Common mistakes to avoid
- Do not summarize instructions into vague wording.
- Do not add explanations, headings or quotes around the result.
- Do not drop the final answer format line.

<parent>
{parent}
</parent>

<child>
{child}
</child>
)riot";

struct TaskPrompt {
  std::string_view task;
  std::string_view prompt;
};

/// Zero-shot chain-of-thought starting prompts for the five benchmark tasks.
inline constexpr std::array<TaskPrompt, 5> kInitialPrompts = {{
    {"logiqa", R"riot(You will solve logical reasoning problems based on the given facts. Think step by step. The last line of your response should be of the following format: "Answer: YES" or "Answer: NO".)riot"},
    {"strategyqa", R"riot(You will answer a commonsense reasoning task. Think step by step. The last line of your response should be of the following format: "Answer: YES" or "Answer: NO".)riot"},
    {"object_counting", R"riot(You will answer a reasoning question. Think step by step. The last line of your response should be of the following format: 'Answer: $VALUE' where VALUE is a numerical value.)riot"},
    {"gsm8k", R"riot(You will answer a mathematical reasoning question. Think step by step. The last line of your response should be of the following format: 'Answer: $VALUE' where VALUE is a numerical value.)riot"},
    {"date_understanding", R"riot(You will answer a multiple-choice question related to date understanding. Think step by step. The last line of your response should be of the following format: 'Answer: $VALUE' where VALUE is a single letter.)riot"},
}};

inline std::optional<std::string_view> initial_prompt(std::string_view task) noexcept {
  for (const auto &p : kInitialPrompts) {
    if (p.task == task) {
      return p.prompt;
    }
  }
  return std::nullopt;
}

} // namespace riot::assets
