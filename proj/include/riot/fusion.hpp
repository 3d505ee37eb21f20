#pragma once

#include "riot/assets.hpp"
#include "riot/error.hpp"
#include "riot/providers.hpp"
#include "riot/segmentation.hpp"
#include "riot/similarity.hpp"
#include "riot/template.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace riot {

/// Residual-connection thresholds. A parent sentence survives when its best
/// match in the child reaches 1 - b1; a child sentence is added when its best
/// match in the parent stays below 1 - b2.
struct FusionConfig {
  double b1 = 0.25;
  double b2 = 0.5;

  void validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(b1) || !in_unit(b2)) {
      throw Error(ErrorKind::Config, "fusion thresholds must lie in [0, 1] (b1=" + std::to_string(b1) +
                                         ", b2=" + std::to_string(b2) + ")");
    }
  }

  [[nodiscard]] double parent_threshold() const noexcept { return 1.0 - b1; }
  [[nodiscard]] double child_threshold() const noexcept { return 1.0 - b2; }
};

struct TraceEntry {
  std::size_t index = 0;
  /// Best cosine against the other prompt; empty when the other prompt has no sentences.
  std::optional<double> max_similarity;

  friend bool operator==(const TraceEntry &, const TraceEntry &) = default;
};

enum class FusionOutcome {
  Fused,
  EmptyParent,   // child returned unchanged
  EmptyChild,    // parent returned unchanged
  NothingKept,   // both selections empty; child returned unchanged
};

inline std::string_view to_string(FusionOutcome o) noexcept {
  switch (o) {
  case FusionOutcome::Fused: return "fused";
  case FusionOutcome::EmptyParent: return "empty_parent";
  case FusionOutcome::EmptyChild: return "empty_child";
  case FusionOutcome::NothingKept: return "nothing_kept";
  }
  return "fused";
}

struct FusionTrace {
  std::vector<TraceEntry> kept_parent;
  std::vector<TraceEntry> dropped_parent;
  std::vector<TraceEntry> kept_child;
  std::vector<TraceEntry> dropped_child;
  double parent_threshold = 0.75;
  double child_threshold = 0.5;
  FusionOutcome outcome = FusionOutcome::Fused;
};

struct FusionResult {
  std::string fused_prompt;
  FusionTrace trace;
};

/// Sentence-level residual connection between a parent prompt and its
/// selected child. Output is the kept parent sentences in parent order
/// followed by the kept child sentences in child order.
inline FusionResult fuse(std::string_view parent_prompt, std::string_view child_prompt, const FusionConfig &config,
                         Provider &embedder, EmbeddingCache *cache = nullptr) {
  config.validate();
  const auto parent = split_sentences(parent_prompt);
  const auto child = split_sentences(child_prompt);

  FusionResult result;
  auto &trace = result.trace;
  trace.parent_threshold = config.parent_threshold();
  trace.child_threshold = config.child_threshold();

  if (parent.empty()) {
    trace.outcome = FusionOutcome::EmptyParent;
    for (const auto &s : child) {
      trace.kept_child.push_back({s.source_index, std::nullopt});
    }
    result.fused_prompt = std::string(child_prompt);
    return result;
  }
  if (child.empty()) {
    trace.outcome = FusionOutcome::EmptyChild;
    for (const auto &s : parent) {
      trace.kept_parent.push_back({s.source_index, std::nullopt});
    }
    result.fused_prompt = std::string(parent_prompt);
    return result;
  }

  const auto parent_vecs = embed_batch(parent, embedder, cache);
  const auto child_vecs = embed_batch(child, embedder, cache);
  const auto sim = cosine_matrix(parent_vecs, child_vecs);

  std::vector<Sentence> selected;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    const double best = row_max(sim, i);
    if (best >= trace.parent_threshold) {
      trace.kept_parent.push_back({i, best});
      selected.push_back(parent[i]);
    } else {
      trace.dropped_parent.push_back({i, best});
    }
  }
  for (std::size_t j = 0; j < child.size(); ++j) {
    const double best = col_max(sim, j);
    if (best < trace.child_threshold) {
      trace.kept_child.push_back({j, best});
      selected.push_back(child[j]);
    } else {
      trace.dropped_child.push_back({j, best});
    }
  }

  if (selected.empty()) {
    trace.outcome = FusionOutcome::NothingKept;
    result.fused_prompt = std::string(child_prompt);
    return result;
  }
  result.fused_prompt = join_sentences(selected);
  return result;
}

inline PromptTemplate default_fusion_template() {
  return PromptTemplate(std::string(assets::kFusionTemplate), {"parent", "child"});
}

/// Asks the optimizer model to merge the two prompts. Throws EmptyCompletion
/// when the model answers with blank text; callers fall back to fuse().
inline std::string fuse_llm(std::string_view parent_prompt, std::string_view child_prompt, Provider &optimizer,
                            const PromptTemplate &tmpl) {
  if (split_sentences(parent_prompt).empty()) {
    return std::string(child_prompt);
  }
  if (split_sentences(child_prompt).empty()) {
    return std::string(parent_prompt);
  }
  const std::vector<Message> messages = {
      {Role::User, tmpl.render({{"parent", std::string(parent_prompt)}, {"child", std::string(child_prompt)}})}};
  auto merged = optimizer.chat_complete(messages, std::nullopt);
  if (trim(merged).empty()) {
    throw Error(ErrorKind::EmptyCompletion, "fusion model returned an empty merge");
  }
  return merged;
}

inline json to_json(const TraceEntry &e) {
  return {{"index", e.index}, {"max_similarity", e.max_similarity ? json(*e.max_similarity) : json(nullptr)}};
}

inline json to_json(const FusionTrace &t) {
  auto list = [](const std::vector<TraceEntry> &entries) {
    json arr = json::array();
    for (const auto &e : entries) {
      arr.push_back(to_json(e));
    }
    return arr;
  };
  return {{"kept_parent", list(t.kept_parent)},   {"dropped_parent", list(t.dropped_parent)},
          {"kept_child", list(t.kept_child)},     {"dropped_child", list(t.dropped_child)},
          {"parent_threshold", t.parent_threshold}, {"child_threshold", t.child_threshold},
          {"outcome", to_string(t.outcome)}};
}

inline FusionTrace fusion_trace_from_json(const json &j) {
  auto list = [](const json &arr) {
    std::vector<TraceEntry> out;
    for (const auto &e : arr) {
      TraceEntry t;
      t.index = e.at("index").get<std::size_t>();
      if (!e.at("max_similarity").is_null()) {
        t.max_similarity = e.at("max_similarity").get<double>();
      }
      out.push_back(t);
    }
    return out;
  };
  FusionTrace t;
  t.kept_parent = list(j.at("kept_parent"));
  t.dropped_parent = list(j.at("dropped_parent"));
  t.kept_child = list(j.at("kept_child"));
  t.dropped_child = list(j.at("dropped_child"));
  t.parent_threshold = j.at("parent_threshold").get<double>();
  t.child_threshold = j.at("child_threshold").get<double>();
  const auto outcome = j.at("outcome").get<std::string>();
  for (auto o : {FusionOutcome::Fused, FusionOutcome::EmptyParent, FusionOutcome::EmptyChild,
                 FusionOutcome::NothingKept}) {
    if (to_string(o) == outcome) {
      t.outcome = o;
    }
  }
  return t;
}

} // namespace riot
