#pragma once

#include "riot/error.hpp"
#include "riot/evaluation.hpp"
#include "riot/fusion.hpp"
#include "riot/gradient.hpp"
#include "riot/hash.hpp"
#include "riot/parallel.hpp"
#include "riot/providers.hpp"
#include "riot/scoring.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace riot {

struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId &, const NodeId &) = default;
};

enum class NodeKind { Root, Candidate, Fused };

inline std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
  case NodeKind::Root: return "root";
  case NodeKind::Candidate: return "candidate";
  case NodeKind::Fused: return "fused";
  }
  return "root";
}

struct CandidateScores {
  double perplexity = 1.0;
  double entropy = 0.0;
  std::size_t length = 0;
};

struct PromptNode {
  NodeId id;
  std::string text;
  std::size_t depth = 0;
  std::optional<NodeId> parent;
  NodeKind kind = NodeKind::Root;
  std::optional<double> metric_value;
  std::optional<double> train_accuracy;
  std::optional<double> validation_accuracy;
  std::optional<FusionTrace> fusion_trace;
  // Candidate nodes only.
  std::optional<CandidateScores> scores;
  std::optional<std::uint64_t> nonce;
  // Fused nodes only: the candidate that won selection.
  std::optional<NodeId> winner;
};

struct CandidateFailure {
  std::uint64_t nonce = 0;
  std::string message;
};

struct IterationRecord {
  std::size_t iteration = 0; // 0-based
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
  NodeId parent;
  std::vector<NodeId> candidates;
  std::optional<NodeId> fused;
  std::optional<double> batch_accuracy;
  std::vector<CandidateFailure> failures;
  bool skipped = false;
};

/// The optimization tree: every prompt ever generated, plus the accepted path
/// of fused nodes (one per completed iteration).
class OptimizationTree {
public:
  OptimizationTree() = default;

  OptimizationTree(std::string root_text, std::size_t width) : width_(width) {
    PromptNode root;
    root.text = std::move(root_text);
    root.kind = NodeKind::Root;
    nodes_.push_back(std::move(root));
  }

  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] NodeId root_id() const noexcept { return NodeId{0}; }
  [[nodiscard]] const std::vector<PromptNode> &nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<NodeId> &accepted_path() const noexcept { return accepted_path_; }
  [[nodiscard]] const std::vector<IterationRecord> &iterations() const noexcept { return iterations_; }

  [[nodiscard]] const PromptNode &node(NodeId id) const { return nodes_.at(id.value); }
  PromptNode &node(NodeId id) { return nodes_.at(id.value); }

  [[nodiscard]] NodeId tip() const noexcept { return accepted_path_.empty() ? root_id() : accepted_path_.back(); }

  /// Number of levels: the root plus one per accepted node.
  [[nodiscard]] std::size_t depth() const noexcept { return accepted_path_.size() + (nodes_.empty() ? 0 : 1); }

  NodeId add_child(PromptNode node, NodeId parent) {
    node.id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
    node.parent = parent;
    node.depth = nodes_.at(parent.value).depth + 1;
    nodes_.push_back(std::move(node));
    return nodes_.back().id;
  }

  void accept(NodeId fused) {
    if (node(fused).kind != NodeKind::Fused || node(fused).parent != tip()) {
      throw Error(ErrorKind::InvalidArgument, "only a fused child of the tip can be accepted");
    }
    accepted_path_.push_back(fused);
  }

  void log_iteration(IterationRecord record) { iterations_.push_back(std::move(record)); }

  /// Structural invariants; throws Schema on violation.
  void validate() const {
    if (nodes_.empty() || nodes_[0].kind != NodeKind::Root || nodes_[0].parent || nodes_[0].depth != 0) {
      throw Error(ErrorKind::Schema, "tree must start with a parentless root at depth 0");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      const auto &n = nodes_[i];
      if (n.id.value != i || n.kind == NodeKind::Root || !n.parent || n.parent->value >= i ||
          nodes_[n.parent->value].depth + 1 != n.depth) {
        throw Error(ErrorKind::Schema, "node " + std::to_string(i) + " breaks the parent/depth law");
      }
    }
    NodeId expected_parent = root_id();
    for (std::size_t t = 0; t < accepted_path_.size(); ++t) {
      const auto &n = node(accepted_path_[t]);
      if (n.kind != NodeKind::Fused || n.parent != expected_parent || n.depth != t + 1) {
        throw Error(ErrorKind::Schema, "accepted path breaks at depth " + std::to_string(t + 1));
      }
      expected_parent = n.id;
    }
  }

  /// Rebuilds a tree from persisted parts; run validate() afterwards.
  static OptimizationTree restore(std::size_t width, std::vector<PromptNode> nodes, std::vector<NodeId> accepted,
                                  std::vector<IterationRecord> iterations) {
    OptimizationTree t;
    t.width_ = width;
    t.nodes_ = std::move(nodes);
    t.accepted_path_ = std::move(accepted);
    t.iterations_ = std::move(iterations);
    return t;
  }

private:
  std::size_t width_ = 3;
  std::vector<PromptNode> nodes_;
  std::vector<NodeId> accepted_path_;
  std::vector<IterationRecord> iterations_;
};

enum class FusionMode { Sentence, Llm };

struct RunConfig {
  std::size_t k = 3;
  FusionConfig fusion;
  MetricKind metric = MetricKind::Perplexity;
  std::size_t batch_size = 4;
  std::size_t epochs = 3;
  std::string initial_prompt;
  std::uint64_t seed = 0;
  bool no_residual = false;
  bool shuffle = false;
  FusionMode fusion_mode = FusionMode::Sentence;
  std::size_t parallelism = 4;

  void validate() const {
    if (k < 1) throw Error(ErrorKind::Config, "K must be at least 1");
    if (batch_size < 1) throw Error(ErrorKind::Config, "batch size must be at least 1");
    if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be at least 1");
    if (trim(initial_prompt).empty()) throw Error(ErrorKind::Config, "initial prompt is empty");
    fusion.validate();
  }

  [[nodiscard]] std::size_t batches_per_epoch(std::size_t train_size) const noexcept {
    return (train_size + batch_size - 1) / batch_size;
  }
  [[nodiscard]] std::size_t total_iterations(std::size_t train_size) const noexcept {
    return epochs * batches_per_epoch(train_size);
  }
};

struct BatchSlot {
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
  std::vector<std::size_t> sample_indices;
};

/// Round-robin batches over the training split, epoch after epoch. With
/// shuffling on, each epoch is permuted by a seeded Fisher-Yates pass.
inline std::vector<BatchSlot> batch_schedule(std::size_t train_size, const RunConfig &config) {
  std::vector<BatchSlot> slots;
  std::vector<std::size_t> order(train_size);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    for (std::size_t i = 0; i < train_size; ++i) {
      order[i] = i;
    }
    if (config.shuffle) {
      std::mt19937_64 rng(hash::combine(config.seed, e));
      for (std::size_t i = train_size; i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
      }
    }
    for (std::size_t b = 0; b * config.batch_size < train_size; ++b) {
      BatchSlot slot{e, b, {}};
      for (std::size_t i = b * config.batch_size; i < std::min(train_size, (b + 1) * config.batch_size); ++i) {
        slot.sample_indices.push_back(order[i]);
      }
      slots.push_back(std::move(slot));
    }
  }
  return slots;
}

/// Providers and shared state used by the loop. Pointers are borrowed.
struct EngineResources {
  OptimizationContext ctx;
  Provider *embedder = nullptr;
  Provider *scorer = nullptr;
  PromptTemplate fusion_template = default_fusion_template();
  EmbeddingCache *embedding_cache = nullptr;

  void validate() const {
    ctx.validate();
    if (embedder == nullptr || scorer == nullptr) {
      throw Error(ErrorKind::Config, "engine needs an embedding and a scoring provider");
    }
  }
};

struct SpawnedCandidate {
  std::uint64_t nonce = 0;
  ScoredCandidate scored;
};

struct SpawnResult {
  std::vector<SpawnedCandidate> candidates;
  std::vector<CandidateFailure> failures;
  std::optional<double> batch_accuracy;
};

/// K independent operator steps from one parent (nonces 0..K-1), each scored.
/// Failed branches are reported, not thrown; zero survivors is AllCandidatesFailed.
inline SpawnResult spawn_candidates(std::string_view parent_text, std::span<const TaskSample> batch,
                                    const EngineResources &res, std::size_t k, std::size_t parallelism = 1) {
  if (k < 1) {
    throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
  }
  struct Branch {
    std::optional<SpawnedCandidate> candidate;
    std::optional<CandidateFailure> failure;
    std::optional<double> batch_accuracy;
  };
  auto branches = parallel_map(k, parallelism, [&](std::size_t i) {
    Branch b;
    const auto nonce = static_cast<std::uint64_t>(i);
    try {
      auto result = step(parent_text, batch, res.ctx, nonce);
      b.batch_accuracy = result.loss->accuracy;
      auto logprobs = res.scorer->token_logprobs(result.candidate);
      b.candidate = SpawnedCandidate{nonce, score_candidate(std::move(result.candidate), std::move(logprobs))};
    } catch (const Error &e) {
      if (e.is_fatal()) {
        throw;
      }
      b.failure = CandidateFailure{nonce, e.what()};
    }
    return b;
  });

  SpawnResult out;
  for (auto &b : branches) {
    if (!out.batch_accuracy && b.batch_accuracy) {
      out.batch_accuracy = b.batch_accuracy;
    }
    if (b.candidate) {
      out.candidates.push_back(std::move(*b.candidate));
    } else if (b.failure) {
      out.failures.push_back(std::move(*b.failure));
    }
  }
  if (out.candidates.empty()) {
    throw Error(ErrorKind::AllCandidatesFailed, "all " + std::to_string(k) + " candidate steps failed");
  }
  return out;
}

/// Residual merge of the tip with the selected child, per the configured mode.
inline std::pair<std::string, std::optional<FusionTrace>> merge_with_parent(std::string_view parent,
                                                                            std::string_view child,
                                                                            const RunConfig &config,
                                                                            const EngineResources &res) {
  if (config.no_residual) {
    return {std::string(child), std::nullopt};
  }
  if (config.fusion_mode == FusionMode::Llm) {
    try {
      return {fuse_llm(parent, child, *res.ctx.optimizer, res.fusion_template), std::nullopt};
    } catch (const Error &e) {
      if (e.is_fatal()) {
        throw;
      }
    }
  }
  auto fused = fuse(parent, child, config.fusion, *res.embedder, res.embedding_cache);
  return {std::move(fused.fused_prompt), std::move(fused.trace)};
}

/// One tree level: spawn from the tip, select, fuse, accept. On
/// AllCandidatesFailed the tree is left untouched.
inline NodeId iterate(OptimizationTree &tree, std::span<const TaskSample> batch, const EngineResources &res,
                      const RunConfig &config, const BatchSlot &slot) {
  const NodeId tip = tree.tip();
  const std::string parent_text = tree.node(tip).text;
  auto spawned = spawn_candidates(parent_text, batch, res, config.k, config.parallelism);

  std::vector<ScoredCandidate> scored;
  scored.reserve(spawned.candidates.size());
  for (const auto &c : spawned.candidates) {
    scored.push_back(c.scored);
  }
  const std::size_t best = select_best(scored, config.metric);
  auto [fused_text, trace] = merge_with_parent(parent_text, scored[best].prompt_text, config, res);

  IterationRecord record;
  record.iteration = tree.iterations().size();
  record.epoch = slot.epoch;
  record.batch_index = slot.batch_index;
  record.parent = tip;
  record.batch_accuracy = spawned.batch_accuracy;
  record.failures = spawned.failures;

  if (spawned.batch_accuracy) {
    tree.node(tip).train_accuracy = spawned.batch_accuracy;
  }
  NodeId winner_id;
  for (std::size_t i = 0; i < spawned.candidates.size(); ++i) {
    const auto &c = spawned.candidates[i];
    PromptNode node;
    node.kind = NodeKind::Candidate;
    node.text = c.scored.prompt_text;
    node.metric_value = c.scored.metric(config.metric);
    node.scores = CandidateScores{c.scored.perplexity, c.scored.entropy, c.scored.length};
    node.nonce = c.nonce;
    const NodeId id = tree.add_child(std::move(node), tip);
    record.candidates.push_back(id);
    if (i == best) {
      winner_id = id;
    }
  }

  PromptNode fused;
  fused.kind = NodeKind::Fused;
  fused.text = std::move(fused_text);
  fused.metric_value = scored[best].metric(config.metric);
  fused.fusion_trace = std::move(trace);
  fused.winner = winner_id;
  const NodeId fused_id = tree.add_child(std::move(fused), tip);
  tree.accept(fused_id);

  record.fused = fused_id;
  tree.log_iteration(std::move(record));
  return fused_id;
}

/// Best validation accuracy over the root and the accepted path; the earliest
/// node wins ties. Nodes without a validation score are ignored unless none has one,
/// in which case the tip is returned.
inline NodeId best_node(const OptimizationTree &tree) {
  std::vector<NodeId> contenders{tree.root_id()};
  contenders.insert(contenders.end(), tree.accepted_path().begin(), tree.accepted_path().end());
  std::optional<NodeId> best;
  double best_acc = -1.0;
  for (auto id : contenders) {
    const auto &acc = tree.node(id).validation_accuracy;
    if (acc && *acc > best_acc) {
      best = id;
      best_acc = *acc;
    }
  }
  return best.value_or(tree.tip());
}

struct IterationSummary {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
  bool skipped = false;
  std::optional<NodeId> fused;
  std::optional<double> batch_accuracy;
  std::optional<double> validation_accuracy;
};

struct RunReport {
  NodeId best;
  std::optional<double> best_validation_accuracy;
  std::optional<double> root_validation_accuracy;
  std::vector<IterationSummary> iterations;
  std::size_t planned_iterations = 0;
  std::size_t completed_iterations = 0;
  std::size_t skipped_iterations = 0;
  bool finished = false;
  std::string best_prompt;
  std::optional<EvalResult> test;
  OptimizationTree tree;
};

struct RunHooks {
  /// Called after the root is scored and after every iteration (completed or
  /// skipped), once the tree is consistent. Used to persist state.
  std::function<void(const OptimizationTree &)> on_checkpoint;
  /// Stop after this many iterations in this invocation (simulated abort).
  std::optional<std::size_t> stop_after;
};

/// Runs (or resumes) the optimization loop over dataset.train, validating every
/// accepted node, then scores the best node on the test split.
inline RunReport run(const RunConfig &config, const Dataset &dataset, const EngineResources &res,
                     std::optional<OptimizationTree> resume_from = std::nullopt, const RunHooks &hooks = {}) {
  config.validate();
  res.validate();
  if (dataset.train.empty()) {
    throw Error(ErrorKind::Config, "training split is empty");
  }
  const auto &spec = dataset.answer_spec;
  auto validate_node = [&](OptimizationTree &tree, NodeId id) {
    if (!dataset.validation.empty()) {
      tree.node(id).validation_accuracy =
          evaluate(tree.node(id).text, dataset.validation, *res.ctx.target, spec, config.parallelism).accuracy;
    }
  };

  OptimizationTree tree;
  if (resume_from) {
    tree = std::move(*resume_from);
    tree.validate();
  } else {
    tree = OptimizationTree(config.initial_prompt, config.k);
    validate_node(tree, tree.root_id());
    if (hooks.on_checkpoint) {
      hooks.on_checkpoint(tree);
    }
  }

  const auto schedule = batch_schedule(dataset.train.size(), config);
  std::size_t ran = 0;
  for (std::size_t t = tree.iterations().size(); t < schedule.size(); ++t) {
    if (hooks.stop_after && ran >= *hooks.stop_after) {
      break;
    }
    const auto &slot = schedule[t];
    std::vector<TaskSample> batch;
    for (auto i : slot.sample_indices) {
      batch.push_back(dataset.train[i]);
    }
    try {
      const NodeId fused = iterate(tree, batch, res, config, slot);
      validate_node(tree, fused);
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::AllCandidatesFailed) {
        throw;
      }
      IterationRecord skipped;
      skipped.iteration = t;
      skipped.epoch = slot.epoch;
      skipped.batch_index = slot.batch_index;
      skipped.parent = tree.tip();
      skipped.skipped = true;
      skipped.failures.push_back({0, e.what()});
      tree.log_iteration(std::move(skipped));
    }
    ++ran;
    if (hooks.on_checkpoint) {
      hooks.on_checkpoint(tree);
    }
  }

  RunReport report;
  report.planned_iterations = schedule.size();
  for (const auto &rec : tree.iterations()) {
    IterationSummary s{rec.iteration, rec.epoch, rec.batch_index, rec.skipped, rec.fused, rec.batch_accuracy, {}};
    if (rec.fused) {
      s.validation_accuracy = tree.node(*rec.fused).validation_accuracy;
    }
    report.completed_iterations += rec.skipped ? 0 : 1;
    report.skipped_iterations += rec.skipped ? 1 : 0;
    report.iterations.push_back(s);
  }
  report.finished = tree.iterations().size() == schedule.size();
  report.best = best_node(tree);
  report.best_prompt = tree.node(report.best).text;
  report.best_validation_accuracy = tree.node(report.best).validation_accuracy;
  report.root_validation_accuracy = tree.node(tree.root_id()).validation_accuracy;
  if (report.finished && !dataset.test.empty()) {
    report.test = evaluate(report.best_prompt, dataset.test, *res.ctx.target, spec, config.parallelism);
  }
  report.tree = std::move(tree);
  return report;
}

} // namespace riot
