#pragma once

#include "riot/assets.hpp"
#include "riot/error.hpp"
#include "riot/evaluation.hpp"
#include "riot/providers.hpp"
#include "riot/template.hpp"

#include <cstdint>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace riot {

inline PromptTemplate default_gradient_template() {
  return PromptTemplate(std::string(assets::kGradientTemplate), {"prompt", "failures"});
}

inline PromptTemplate default_proposal_template() {
  return PromptTemplate(std::string(assets::kProposalTemplate), {"prompt", "gradient"});
}

/// Everything one optimization step needs. Providers are borrowed.
struct OptimizationContext {
  Provider *target = nullptr;
  Provider *optimizer = nullptr;
  PromptTemplate gradient_template = default_gradient_template();
  PromptTemplate proposal_template = default_proposal_template();
  AnswerSpec answer_spec;
  std::size_t parallelism = 1;

  void validate() const {
    if (target == nullptr || optimizer == nullptr) {
      throw Error(ErrorKind::Config, "optimization context needs both a target and an optimizer provider");
    }
  }
};

struct BatchLoss {
  std::vector<SampleRecord> batch;
  double accuracy = 0.0;
  std::string critique;
  /// True when the critique is the rule-based summary because the optimizer failed.
  bool critique_fallback = false;
};

struct TextGradient {
  std::string text;
  std::shared_ptr<const BatchLoss> source_loss;
};

namespace detail {

inline std::string format_accuracy(const std::vector<SampleRecord> &records, double accuracy) {
  const auto correct = std::count_if(records.begin(), records.end(), [](const SampleRecord &r) { return r.correct; });
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%zu/%zu)", accuracy, static_cast<std::size_t>(correct), records.size());
  return buf;
}

inline std::string describe_failures(std::span<const TaskSample> batch, const std::vector<SampleRecord> &records) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (r.correct) {
      continue;
    }
    std::string got = r.error ? "(no response: " + *r.error + ")" : r.extracted.value_or("(no answer found)");
    out += "id: " + r.id + "\nquestion: " + render_query(batch[i]) + "\nmodel answer: " + got +
           "\nexpected answer: " + r.ground_truth + "\n\n";
  }
  if (out.empty()) {
    return "No errors: every sample in this batch was answered correctly.";
  }
  out.pop_back();
  out.pop_back();
  return out;
}

inline std::string rule_based_critique(const std::vector<SampleRecord> &records, double accuracy) {
  std::string out = "The prompt reached accuracy " + format_accuracy(records, accuracy) + " on the batch.";
  std::string failed;
  for (const auto &r : records) {
    if (!r.correct) {
      failed += (failed.empty() ? "" : "; ") + r.id + " (expected " + r.ground_truth + ", got " +
                (r.error ? std::string("no response") : r.extracted.value_or("no answer")) + ")";
    }
  }
  if (failed.empty()) {
    out += " No sample failed; keep the instructions that work and make the output format explicit.";
  } else {
    out += " Failed samples: " + failed + ". Revise the instructions so these questions are answered correctly.";
  }
  return out;
}

} // namespace detail

/// Drops markdown fences and surrounding quotes that chat models like to add.
inline std::string clean_completion(std::string_view text) {
  std::string s = trim(text);
  if (s.rfind("```", 0) == 0) {
    const auto first_nl = s.find('\n');
    s = first_nl == std::string::npos ? s.substr(3) : s.substr(first_nl + 1);
    const auto fence = s.rfind("```");
    if (fence != std::string::npos) {
      s = s.substr(0, fence);
    }
    s = trim(s);
  }
  auto strip_pair = [&](std::string_view open, std::string_view close) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
      return true;
    }
    return false;
  };
  strip_pair("\"", "\"") || strip_pair("'", "'") || strip_pair("\xE2\x80\x9C", "\xE2\x80\x9D");
  return s;
}

/// Target-model responses for the batch, aligned by index.
inline std::vector<Response> forward(std::string_view prompt, std::span<const TaskSample> batch,
                                     const OptimizationContext &ctx) {
  ctx.validate();
  return forward(prompt, batch, *ctx.target, ctx.parallelism);
}

inline BatchLoss compute_loss(std::string_view prompt, std::span<const TaskSample> batch,
                              std::span<const Response> responses, const OptimizationContext &ctx) {
  ctx.validate();
  if (responses.size() != batch.size()) {
    throw Error(ErrorKind::InvalidArgument, "responses are not aligned with the batch");
  }
  BatchLoss loss;
  loss.batch = score_responses(batch, responses, ctx.answer_spec);
  loss.accuracy = accuracy_of(loss.batch);

  const std::string request = ctx.gradient_template.render({
      {"prompt", std::string(prompt)},
      {"failures", detail::describe_failures(batch, loss.batch)},
      {"accuracy", detail::format_accuracy(loss.batch, loss.accuracy)},
  });
  const std::vector<Message> messages = {{Role::User, request}};
  try {
    loss.critique = trim(ctx.optimizer->chat_complete(messages, std::nullopt));
  } catch (const Error &e) {
    if (e.is_fatal() || !e.is_backend()) {
      throw;
    }
  }
  if (loss.critique.empty()) {
    loss.critique = detail::rule_based_critique(loss.batch, loss.accuracy);
    loss.critique_fallback = true;
  }
  return loss;
}

inline TextGradient text_gradient(BatchLoss loss) {
  auto shared = std::make_shared<const BatchLoss>(std::move(loss));
  return TextGradient{shared->critique, shared};
}

/// Asks the optimizer for a revised prompt. The nonce goes both into the
/// request (as a seed) and into the rendered template, so distinct nonces can
/// yield distinct candidates even at temperature 0.
inline std::string propose(std::string_view prompt, const TextGradient &gradient, const OptimizationContext &ctx,
                           std::uint64_t nonce) {
  ctx.validate();
  if (trim(gradient.text).empty()) {
    throw Error(ErrorKind::InvalidArgument, "text gradient is empty");
  }
  const std::vector<Message> messages = {{Role::User, ctx.proposal_template.render({
                                                          {"prompt", std::string(prompt)},
                                                          {"gradient", gradient.text},
                                                          {"nonce", std::to_string(nonce)},
                                                      })}};
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto candidate = clean_completion(ctx.optimizer->chat_complete(messages, nonce));
    if (!candidate.empty()) {
      return candidate;
    }
  }
  throw Error(ErrorKind::EmptyCompletion, "optimizer returned an empty prompt twice");
}

struct StepResult {
  std::string candidate;
  std::shared_ptr<const BatchLoss> loss;
};

/// One application of the prompt optimization operator: forward, loss, proposal.
inline StepResult step(std::string_view prompt, std::span<const TaskSample> batch, const OptimizationContext &ctx,
                       std::uint64_t nonce) {
  if (batch.empty()) {
    throw Error(ErrorKind::EmptyBatch, "optimization step on an empty batch");
  }
  const auto responses = forward(prompt, batch, ctx);
  auto gradient = text_gradient(compute_loss(prompt, batch, responses, ctx));
  auto candidate = propose(prompt, gradient, ctx, nonce);
  return {std::move(candidate), gradient.source_loss};
}

} // namespace riot
