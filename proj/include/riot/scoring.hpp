#pragma once

#include "riot/error.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riot {

/// Natural-log conditional probability of one token given its prefix.
struct TokenLogprob {
  std::string token;
  double logprob = 0.0;

  TokenLogprob() = default;
  TokenLogprob(std::string tok, double lp) : token(std::move(tok)), logprob(lp) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorKind::InvalidArgument,
                  "token logprob must be finite and <= 0, got " + std::to_string(lp));
    }
  }
};

enum class MetricKind { Perplexity, Entropy, Length };

inline std::string_view to_string(MetricKind kind) noexcept {
  switch (kind) {
  case MetricKind::Perplexity: return "perplexity";
  case MetricKind::Entropy: return "entropy";
  case MetricKind::Length: return "length";
  }
  return "perplexity";
}

inline std::optional<MetricKind> parse_metric(std::string_view name) noexcept {
  if (name == "perplexity") return MetricKind::Perplexity;
  if (name == "entropy") return MetricKind::Entropy;
  if (name == "length") return MetricKind::Length;
  return std::nullopt;
}

/// exp of the negative mean token log-likelihood.
inline double perplexity(std::span<const TokenLogprob> logprobs) {
  if (logprobs.empty()) {
    throw Error(ErrorKind::EmptySequence, "perplexity of an empty token sequence");
  }
  double sum = 0.0;
  for (const auto &t : logprobs) {
    sum += t.logprob;
  }
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

/// Realized-token entropy: -sum p_j log p_j over the observed tokens.
inline double entropy(std::span<const TokenLogprob> logprobs) {
  if (logprobs.empty()) {
    throw Error(ErrorKind::EmptySequence, "entropy of an empty token sequence");
  }
  double sum = 0.0;
  for (const auto &t : logprobs) {
    sum -= std::exp(t.logprob) * t.logprob;
  }
  return sum;
}

inline std::size_t token_length(std::span<const TokenLogprob> logprobs) noexcept { return logprobs.size(); }

struct ScoredCandidate {
  std::string prompt_text;
  std::vector<TokenLogprob> token_logprobs;
  double perplexity = 1.0;
  double entropy = 0.0;
  std::size_t length = 0;

  [[nodiscard]] double metric(MetricKind kind) const noexcept {
    switch (kind) {
    case MetricKind::Perplexity: return perplexity;
    case MetricKind::Entropy: return entropy;
    case MetricKind::Length: return static_cast<double>(length);
    }
    return perplexity;
  }
};

inline ScoredCandidate score_candidate(std::string prompt_text, std::vector<TokenLogprob> logprobs) {
  ScoredCandidate c;
  c.perplexity = perplexity(logprobs);
  c.entropy = entropy(logprobs);
  c.length = token_length(logprobs);
  c.prompt_text = std::move(prompt_text);
  c.token_logprobs = std::move(logprobs);
  return c;
}

/// Argmax of the metric; ties go to the lowest index.
inline std::size_t select_best(std::span<const ScoredCandidate> candidates, MetricKind metric) {
  if (candidates.empty()) {
    throw Error(ErrorKind::EmptyCandidateSet, "select_best on an empty candidate set");
  }
  std::size_t best = 0;
  double best_value = candidates[0].metric(metric);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double v = candidates[i].metric(metric);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

} // namespace riot
