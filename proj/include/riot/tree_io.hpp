#pragma once

#include "riot/engine.hpp"
#include "riot/error.hpp"
#include "riot/fusion.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace riot {

inline constexpr int kTreeSchemaVersion = 1;

namespace detail {

template <class T> json opt(const std::optional<T> &v) { return v ? json(*v) : json(nullptr); }

inline json opt_id(const std::optional<NodeId> &v) { return v ? json(v->value) : json(nullptr); }

template <class T> std::optional<T> get_opt(const json &j, const char *key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  return j.at(key).get<T>();
}

inline std::optional<NodeId> get_opt_id(const json &j, const char *key) {
  auto v = get_opt<std::uint32_t>(j, key);
  return v ? std::optional<NodeId>(NodeId{*v}) : std::nullopt;
}

inline NodeKind parse_kind(const std::string &s) {
  for (auto k : {NodeKind::Root, NodeKind::Candidate, NodeKind::Fused}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  throw Error(ErrorKind::Schema, "unknown node kind \"" + s + "\"");
}

} // namespace detail

inline json to_json(const PromptNode &n) {
  json j = {
      {"id", n.id.value},
      {"text", n.text},
      {"depth", n.depth},
      {"parent_id", detail::opt_id(n.parent)},
      {"kind", to_string(n.kind)},
      {"metric_value", detail::opt(n.metric_value)},
      {"train_accuracy", detail::opt(n.train_accuracy)},
      {"validation_accuracy", detail::opt(n.validation_accuracy)},
      {"fusion_trace", n.fusion_trace ? to_json(*n.fusion_trace) : json(nullptr)},
  };
  if (n.kind == NodeKind::Candidate) {
    j["nonce"] = detail::opt(n.nonce);
    j["scores"] = n.scores ? json{{"perplexity", n.scores->perplexity},
                                  {"entropy", n.scores->entropy},
                                  {"length", n.scores->length}}
                           : json(nullptr);
  }
  if (n.kind == NodeKind::Fused) {
    j["winner_id"] = detail::opt_id(n.winner);
  }
  return j;
}

inline PromptNode node_from_json(const json &j) {
  PromptNode n;
  n.id = NodeId{j.at("id").get<std::uint32_t>()};
  n.text = j.at("text").get<std::string>();
  n.depth = j.at("depth").get<std::size_t>();
  n.parent = detail::get_opt_id(j, "parent_id");
  n.kind = detail::parse_kind(j.at("kind").get<std::string>());
  n.metric_value = detail::get_opt<double>(j, "metric_value");
  n.train_accuracy = detail::get_opt<double>(j, "train_accuracy");
  n.validation_accuracy = detail::get_opt<double>(j, "validation_accuracy");
  if (j.contains("fusion_trace") && !j.at("fusion_trace").is_null()) {
    n.fusion_trace = fusion_trace_from_json(j.at("fusion_trace"));
  }
  n.nonce = detail::get_opt<std::uint64_t>(j, "nonce");
  if (j.contains("scores") && !j.at("scores").is_null()) {
    const auto &s = j.at("scores");
    n.scores = CandidateScores{s.at("perplexity").get<double>(), s.at("entropy").get<double>(),
                               s.at("length").get<std::size_t>()};
  }
  n.winner = detail::get_opt_id(j, "winner_id");
  return n;
}

inline json to_json(const IterationRecord &r) {
  json candidates = json::array();
  for (auto id : r.candidates) {
    candidates.push_back(id.value);
  }
  json failures = json::array();
  for (const auto &f : r.failures) {
    failures.push_back({{"nonce", f.nonce}, {"message", f.message}});
  }
  return {{"iteration", r.iteration},       {"epoch", r.epoch},
          {"batch_index", r.batch_index},   {"parent_id", r.parent.value},
          {"candidate_ids", candidates},    {"fused_id", detail::opt_id(r.fused)},
          {"batch_accuracy", detail::opt(r.batch_accuracy)}, {"failures", failures},
          {"skipped", r.skipped}};
}

inline IterationRecord iteration_from_json(const json &j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<std::size_t>();
  r.epoch = j.at("epoch").get<std::size_t>();
  r.batch_index = j.at("batch_index").get<std::size_t>();
  r.parent = NodeId{j.at("parent_id").get<std::uint32_t>()};
  for (const auto &c : j.at("candidate_ids")) {
    r.candidates.push_back(NodeId{c.get<std::uint32_t>()});
  }
  r.fused = detail::get_opt_id(j, "fused_id");
  r.batch_accuracy = detail::get_opt<double>(j, "batch_accuracy");
  for (const auto &f : j.at("failures")) {
    r.failures.push_back({f.at("nonce").get<std::uint64_t>(), f.at("message").get<std::string>()});
  }
  r.skipped = j.at("skipped").get<bool>();
  return r;
}

/// Tree document, schema_version 1. Key order is sorted, so equal trees
/// serialize to identical bytes.
inline json to_json(const OptimizationTree &tree) {
  json nodes = json::array();
  for (const auto &n : tree.nodes()) {
    nodes.push_back(to_json(n));
  }
  json accepted = json::array();
  for (auto id : tree.accepted_path()) {
    accepted.push_back(id.value);
  }
  json iterations = json::array();
  for (const auto &r : tree.iterations()) {
    iterations.push_back(to_json(r));
  }
  return {{"schema_version", kTreeSchemaVersion},
          {"width", tree.width()},
          {"root_id", tree.root_id().value},
          {"accepted_path", accepted},
          {"nodes", nodes},
          {"iterations", iterations}};
}

inline OptimizationTree tree_from_json(const json &j) {
  try {
    if (j.at("schema_version").get<int>() != kTreeSchemaVersion) {
      throw Error(ErrorKind::Schema, "unsupported tree schema_version " + j.at("schema_version").dump());
    }
    std::vector<PromptNode> nodes;
    for (const auto &n : j.at("nodes")) {
      nodes.push_back(node_from_json(n));
    }
    std::vector<NodeId> accepted;
    for (const auto &a : j.at("accepted_path")) {
      accepted.push_back(NodeId{a.get<std::uint32_t>()});
    }
    std::vector<IterationRecord> iterations;
    for (const auto &r : j.at("iterations")) {
      iterations.push_back(iteration_from_json(r));
    }
    auto tree = OptimizationTree::restore(j.at("width").get<std::size_t>(), std::move(nodes), std::move(accepted),
                                          std::move(iterations));
    tree.validate();
    return tree;
  } catch (const json::exception &e) {
    throw Error(ErrorKind::Schema, std::string("malformed tree document: ") + e.what());
  }
}

inline std::string tree_document(const OptimizationTree &tree) { return to_json(tree).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Graphviz

namespace detail {

inline std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '"' || c == '\\') {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  return out;
}

inline std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

} // namespace detail

/// DOT digraph: one box per node labeled id/kind/metric, parent -> child edges,
/// the accepted path drawn bold red.
inline std::string export_dot(const OptimizationTree &tree) {
  std::vector<bool> accepted(tree.size(), false);
  accepted[tree.root_id().value] = true;
  for (auto id : tree.accepted_path()) {
    accepted[id.value] = true;
  }

  std::ostringstream out;
  out << "digraph riot {\n";
  out << "  rankdir=TB;\n";
  out << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto &n : tree.nodes()) {
    std::string label = "n" + std::to_string(n.id.value) + "\n" + std::string(to_string(n.kind));
    if (n.metric_value) {
      label += "\nmetric=" + detail::fmt_metric(*n.metric_value);
    }
    if (n.validation_accuracy) {
      label += "\nval=" + detail::fmt_metric(*n.validation_accuracy);
    }
    out << "  n" << n.id.value << " [label=\"" << detail::dot_escape(label) << "\"";
    out << ", tooltip=\"" << detail::dot_escape(n.text) << "\"";
    if (accepted[n.id.value]) {
      out << ", style=\"filled,bold\", fillcolor=\"lightsalmon\", color=\"red\"";
    } else if (n.kind == NodeKind::Candidate) {
      out << ", style=\"dashed\"";
    }
    out << "];\n";
  }
  for (const auto &n : tree.nodes()) {
    if (!n.parent) {
      continue;
    }
    out << "  n" << n.parent->value << " -> n" << n.id.value;
    if (accepted[n.id.value]) {
      out << " [color=\"red\", penwidth=2]";
    }
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Run report

inline json to_json(const RunReport &r) {
  json iterations = json::array();
  for (const auto &s : r.iterations) {
    iterations.push_back({{"iteration", s.iteration},
                          {"epoch", s.epoch},
                          {"batch_index", s.batch_index},
                          {"skipped", s.skipped},
                          {"fused_id", detail::opt_id(s.fused)},
                          {"batch_accuracy", detail::opt(s.batch_accuracy)},
                          {"validation_accuracy", detail::opt(s.validation_accuracy)}});
  }
  return {{"schema_version", kTreeSchemaVersion},
          {"best_node_id", r.best.value},
          {"best_prompt", r.best_prompt},
          {"best_validation_accuracy", detail::opt(r.best_validation_accuracy)},
          {"root_validation_accuracy", detail::opt(r.root_validation_accuracy)},
          {"planned_iterations", r.planned_iterations},
          {"completed_iterations", r.completed_iterations},
          {"skipped_iterations", r.skipped_iterations},
          {"finished", r.finished},
          {"iterations", iterations},
          {"test", r.test ? to_json(*r.test) : json(nullptr)},
          {"tree_nodes", r.tree.size()},
          {"tree_depth", r.tree.depth()}};
}

// ---------------------------------------------------------------------------
// Run directory: config.json, tree.json, transcripts.jsonl, report.json

inline void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::Config, "cannot write " + tmp.string());
    }
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::Config, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class RunDirectory {
public:
  static RunDirectory create(const std::filesystem::path &dir, const json &effective_config) {
    namespace fs = std::filesystem;
    if (fs::exists(dir) && !fs::is_empty(dir)) {
      throw Error(ErrorKind::Config, "run directory " + dir.string() + " already exists and is not empty");
    }
    fs::create_directories(dir);
    RunDirectory rd(dir);
    write_file_atomic(rd.config_path(), effective_config.dump(2) + "\n");
    return rd;
  }

  static RunDirectory open(const std::filesystem::path &dir) {
    if (!std::filesystem::is_regular_file(dir / "config.json")) {
      throw Error(ErrorKind::Config, dir.string() + " is not a run directory (config.json missing)");
    }
    return RunDirectory(dir);
  }

  [[nodiscard]] const std::filesystem::path &path() const noexcept { return dir_; }
  [[nodiscard]] std::filesystem::path config_path() const { return dir_ / "config.json"; }
  [[nodiscard]] std::filesystem::path tree_path() const { return dir_ / "tree.json"; }
  [[nodiscard]] std::filesystem::path transcripts_path() const { return dir_ / "transcripts.jsonl"; }
  [[nodiscard]] std::filesystem::path report_path() const { return dir_ / "report.json"; }

  [[nodiscard]] json config() const {
    try {
      return json::parse(read_file(config_path()));
    } catch (const json::parse_error &e) {
      throw Error(ErrorKind::Config, config_path().string() + ": " + e.what());
    }
  }

  [[nodiscard]] bool has_tree() const { return std::filesystem::is_regular_file(tree_path()); }

  [[nodiscard]] OptimizationTree load_tree() const {
    try {
      return tree_from_json(json::parse(read_file(tree_path())));
    } catch (const json::parse_error &e) {
      throw Error(ErrorKind::Schema, tree_path().string() + ": " + e.what());
    }
  }

  void save_tree(const OptimizationTree &tree) const { write_file_atomic(tree_path(), tree_document(tree)); }
  void save_report(const RunReport &report) const { write_file_atomic(report_path(), to_json(report).dump(2) + "\n"); }

private:
  explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::filesystem::path dir_;
};

} // namespace riot
