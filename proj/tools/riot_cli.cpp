// riot: command-line front end for tree-structured prompt optimization.

#include "riot/config.hpp"
#include "riot/engine.hpp"
#include "riot/evaluation.hpp"
#include "riot/fusion.hpp"
#include "riot/http_provider.hpp"
#include "riot/mock_provider.hpp"
#include "riot/tree_io.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using riot::Error;
using riot::ErrorKind;
using riot::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;

int exit_code_for(const Error &e) { return e.is_backend() ? kExitProvider : kExitConfig; }

std::string read_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::Config, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string one_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string six_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Owns the providers for one command. In mock mode a single seeded mock
/// serves every role and no network client is ever constructed.
class ProviderSet {
public:
  ProviderSet(const riot::CliConfig &cfg, std::shared_ptr<riot::TranscriptLog> log) {
    if (cfg.mock) {
      mock_ = std::make_shared<riot::MockProvider>(cfg.run.seed);
      mock_->set_transcript(log);
      return;
    }
    for (const auto &[role, pc] : cfg.providers) {
      auto p = std::make_shared<riot::HttpProvider>(pc);
      p->set_transcript(log);
      by_role_[role] = std::move(p);
    }
  }

  [[nodiscard]] riot::MockProvider *mock() const { return mock_.get(); }

  [[nodiscard]] riot::Provider &get(const std::string &role) const {
    if (mock_) {
      return *mock_;
    }
    if (auto it = by_role_.find(role); it != by_role_.end()) {
      return *it->second;
    }
    if (role == "scorer") {
      return get("target");
    }
    throw Error(ErrorKind::Config, "no provider configured for role \"" + role + "\"");
  }

private:
  std::shared_ptr<riot::MockProvider> mock_;
  std::map<std::string, std::shared_ptr<riot::Provider>> by_role_;
};

riot::PromptTemplate template_or_default(const riot::CliConfig &cfg, const std::string &name,
                                         riot::PromptTemplate fallback, const std::vector<std::string> &required) {
  if (auto it = cfg.templates.find(name); it != cfg.templates.end()) {
    return riot::PromptTemplate::from_file(it->second, required);
  }
  return fallback;
}

// ---------------------------------------------------------------------------
// optimize

struct OptimizeArgs {
  std::string config;
  std::optional<std::size_t> k;
  std::optional<double> b1;
  std::optional<double> b2;
  std::optional<std::string> metric;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_dir;
  bool mock = false;
  bool no_residual = false;
  std::string resume;
  std::optional<std::size_t> stop_after;
  bool json = false;
};

int cmd_optimize(const OptimizeArgs &a) {
  riot::CliConfig cfg;
  std::optional<riot::RunDirectory> dir;
  const bool overrides = a.k || a.b1 || a.b2 || a.metric || a.seed || a.run_dir || a.mock || a.no_residual;

  if (!a.resume.empty()) {
    if (overrides || !a.config.empty()) {
      throw Error(ErrorKind::Config, "--resume takes its configuration from the run directory; drop other options");
    }
    dir = riot::RunDirectory::open(a.resume);
    cfg = riot::config_from_json(dir->config());
    cfg.run_dir = a.resume;
  } else {
    if (a.config.empty()) {
      throw Error(ErrorKind::Config, "--config is required (or --resume <run-dir>)");
    }
    cfg = riot::load_config(a.config);
    if (a.k) cfg.run.k = *a.k;
    if (a.b1) cfg.run.fusion.b1 = *a.b1;
    if (a.b2) cfg.run.fusion.b2 = *a.b2;
    if (a.metric) {
      auto m = riot::parse_metric(*a.metric);
      if (!m) {
        throw Error(ErrorKind::Config, "--select-metric must be perplexity, entropy or length");
      }
      cfg.run.metric = *m;
    }
    if (a.seed) cfg.run.seed = *a.seed;
    if (a.run_dir) cfg.run_dir = *a.run_dir;
    if (a.mock) cfg.mock = true;
    if (a.no_residual) cfg.run.no_residual = true;
  }
  cfg.validate();
  const auto dataset = riot::load_dataset(cfg.dataset);
  if (!dir) {
    dir = riot::RunDirectory::create(cfg.run_dir, riot::to_json(cfg));
  }

  auto log = std::make_shared<riot::TranscriptLog>(dir->transcripts_path());
  ProviderSet providers(cfg, log);
  if (auto *mock = providers.mock()) {
    mock->set_answer_key(riot::make_answer_key(dataset));
  }

  riot::EmbeddingCache cache;
  riot::EngineResources res;
  res.ctx.target = &providers.get("target");
  res.ctx.optimizer = &providers.get("optimizer");
  res.ctx.answer_spec = dataset.answer_spec;
  res.ctx.parallelism = cfg.run.parallelism;
  res.ctx.gradient_template =
      template_or_default(cfg, "gradient", riot::default_gradient_template(), {"prompt", "failures"});
  res.ctx.proposal_template =
      template_or_default(cfg, "proposal", riot::default_proposal_template(), {"prompt", "gradient"});
  res.fusion_template = template_or_default(cfg, "fusion", riot::default_fusion_template(), {"parent", "child"});
  res.embedder = &providers.get("embedding");
  res.scorer = &providers.get("scorer");
  res.embedding_cache = &cache;

  std::optional<riot::OptimizationTree> resume_tree;
  if (dir->has_tree()) {
    resume_tree = dir->load_tree();
  }
  riot::RunHooks hooks;
  hooks.stop_after = a.stop_after;
  hooks.on_checkpoint = [&](const riot::OptimizationTree &tree) { dir->save_tree(tree); };

  const auto report = riot::run(cfg.run, dataset, res, std::move(resume_tree), hooks);
  dir->save_report(report);

  if (a.json) {
    std::cout << riot::to_json(report).dump(2) << "\n";
  } else {
    std::cout << "run directory: " << dir->path().string() << "\n";
    std::cout << "iterations: " << report.completed_iterations << " completed, " << report.skipped_iterations
              << " skipped, " << report.planned_iterations << " planned" << (report.finished ? "" : " (stopped early)")
              << "\n";
    std::cout << "tree: " << report.tree.size() << " nodes, depth " << report.tree.depth() << "\n";
    std::cout << "best node: n" << report.best.value;
    if (report.best_validation_accuracy) {
      std::cout << " (validation " << one_decimal(100.0 * *report.best_validation_accuracy) << ")";
    }
    std::cout << "\n";
    if (report.test) {
      std::cout << "test accuracy: " << one_decimal(100.0 * report.test->accuracy) << "\n";
    }
    std::cout << "best prompt:\n" << report.best_prompt << "\n";
  }
  // Skips are tolerated, but a run where nothing ever succeeded is a provider failure.
  if (report.completed_iterations == 0 && report.skipped_iterations > 0) {
    std::cerr << "error: all " << report.skipped_iterations << " iterations were skipped; check the provider endpoints\n";
    return kExitProvider;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string prompt_file;
  std::string dataset;
  std::string split = "test";
  std::size_t repeats = 1;
  std::string config;
  bool mock = false;
  std::string mock_policy = "seeded";
  std::uint64_t seed = 0;
  std::string records = "eval_records.jsonl";
  bool json = false;
};

int cmd_evaluate(const EvaluateArgs &a) {
  if (a.repeats < 1) {
    throw Error(ErrorKind::Config, "--repeats must be at least 1");
  }
  riot::CliConfig cfg;
  if (!a.config.empty()) {
    cfg = riot::load_config(a.config);
  }
  cfg.mock = cfg.mock || a.mock || a.config.empty();
  const auto dataset = riot::load_dataset(a.dataset.empty() ? cfg.dataset : fs::path(a.dataset));
  const auto &samples = dataset.split(a.split);
  if (samples.empty()) {
    throw Error(ErrorKind::Config, "split \"" + a.split + "\" is empty");
  }
  const std::string prompt = read_text(a.prompt_file);

  riot::MockAnswerPolicy policy = riot::MockAnswerPolicy::Seeded;
  if (a.mock_policy == "oracle") policy = riot::MockAnswerPolicy::Oracle;
  else if (a.mock_policy == "alternating") policy = riot::MockAnswerPolicy::Alternating;
  else if (a.mock_policy != "seeded") throw Error(ErrorKind::Config, "--mock-policy must be seeded, oracle or alternating");

  std::vector<double> accuracies;
  std::ofstream records(a.records, std::ios::trunc);
  if (!records) {
    throw Error(ErrorKind::Config, "cannot write " + a.records);
  }
  for (std::size_t r = 0; r < a.repeats; ++r) {
    cfg.run.seed = a.seed + r;
    ProviderSet providers(cfg, nullptr);
    if (auto *mock = providers.mock()) {
      mock->set_answer_key(riot::make_answer_key(dataset));
      mock->set_answer_policy(policy);
    }
    const auto result =
        riot::evaluate(prompt, samples, providers.get("target"), dataset.answer_spec, cfg.run.parallelism);
    accuracies.push_back(100.0 * result.accuracy);
    for (const auto &rec : result.records) {
      auto j = riot::to_json(rec);
      j["repeat"] = r;
      records << j.dump() << "\n";
    }
  }
  const auto stats = riot::mean_and_sample_std(accuracies);
  if (a.json) {
    json out = {{"accuracy", stats.mean}, {"split", a.split}, {"samples", samples.size()}, {"records", a.records}};
    if (a.repeats > 1) {
      out["mean"] = stats.mean;
      out["std"] = stats.stddev;
      out["repeats"] = a.repeats;
      out["runs"] = accuracies;
    }
    std::cout << out.dump(2) << "\n";
  } else if (a.repeats > 1) {
    std::cout << one_decimal(stats.mean) << " \xC2\xB1 " << one_decimal(stats.stddev) << " (" << a.repeats
              << " runs, " << samples.size() << " samples)\n";
  } else {
    std::cout << one_decimal(stats.mean) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fuse

struct FuseArgs {
  std::string parent;
  std::string child;
  double b1 = 0.25;
  double b2 = 0.5;
  bool trace = false;
  std::string vectors;
  std::string config;
  std::uint64_t seed = 0;
  bool json = false;
};

int cmd_fuse(const FuseArgs &a) {
  riot::FusionConfig fc{a.b1, a.b2};
  fc.validate();
  const std::string parent = read_text(a.parent);
  const std::string child = read_text(a.child);

  riot::CliConfig cfg;
  if (!a.config.empty()) {
    cfg = riot::load_config(a.config);
  } else {
    cfg.mock = true;
  }
  cfg.run.seed = a.seed;
  ProviderSet providers(cfg, nullptr);
  if (auto *mock = providers.mock(); mock && !a.vectors.empty()) {
    std::unordered_map<std::string, std::vector<double>> overrides;
    const auto j = json::parse(read_text(a.vectors));
    for (const auto &[sentence, values] : j.items()) {
      overrides[sentence] = values.get<std::vector<double>>();
    }
    mock->set_embedding_overrides(std::move(overrides));
  }
  const auto result = riot::fuse(parent, child, fc, providers.get("embedding"));

  if (a.json) {
    json out = {{"fused_prompt", result.fused_prompt}};
    if (a.trace) {
      out["trace"] = riot::to_json(result.trace);
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << result.fused_prompt << "\n";
  if (a.trace) {
    const auto ps = riot::split_sentences(parent);
    const auto cs = riot::split_sentences(child);
    auto sim = [](const std::optional<double> &v) { return v ? six_decimals(*v) : std::string("-"); };
    struct Row {
      const char *source;
      const riot::TraceEntry *entry;
      const char *decision;
      const std::string *text;
    };
    std::vector<Row> rows;
    for (const auto &e : result.trace.kept_parent) rows.push_back({"parent", &e, "keep", &ps[e.index].text});
    for (const auto &e : result.trace.dropped_parent) rows.push_back({"parent", &e, "drop", &ps[e.index].text});
    for (const auto &e : result.trace.kept_child) rows.push_back({"child", &e, "keep", &cs[e.index].text});
    for (const auto &e : result.trace.dropped_child) rows.push_back({"child", &e, "drop", &cs[e.index].text});
    std::stable_sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) {
      return std::string_view(a.source) == b.source ? a.entry->index < b.entry->index : std::string_view(a.source) == "parent";
    });
    std::cout << "\nsource\tindex\tmax_similarity\tdecision\tsentence\n";
    for (const auto &r : rows) {
      std::cout << r.source << "\t" << r.entry->index << "\t" << sim(r.entry->max_similarity) << "\t" << r.decision
                << "\t" << *r.text << "\n";
    }
    std::cout << "parent: " << result.trace.kept_parent.size() << " kept + " << result.trace.dropped_parent.size()
              << " dropped = " << ps.size() << "; child: " << result.trace.kept_child.size() << " kept + "
              << result.trace.dropped_child.size() << " dropped = " << cs.size() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string prompt_file;
  std::string metric = "perplexity";
  std::string config;
  bool mock = false;
  std::uint64_t seed = 0;
  bool json = false;
};

int cmd_score(const ScoreArgs &a) {
  const auto metric = riot::parse_metric(a.metric);
  if (!metric) {
    throw Error(ErrorKind::Config, "--metric must be perplexity, entropy or length");
  }
  riot::CliConfig cfg;
  if (!a.config.empty()) {
    cfg = riot::load_config(a.config);
  }
  cfg.mock = cfg.mock || a.mock || a.config.empty();
  cfg.run.seed = a.seed;
  ProviderSet providers(cfg, nullptr);
  const std::string text = read_text(a.prompt_file);
  auto logprobs = providers.get("scorer").token_logprobs(text);
  const auto scored = riot::score_candidate(text, std::move(logprobs));
  const double value = scored.metric(*metric);
  if (a.json) {
    std::cout << json{{"metric", a.metric}, {"value", value}, {"J", scored.length}}.dump(2) << "\n";
  } else {
    std::cout << a.metric << " " << (*metric == riot::MetricKind::Length ? std::to_string(scored.length) : six_decimals(value))
              << "\nJ " << scored.length << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// waa

struct WaaArgs {
  std::string results;
  bool json = false;
};

int cmd_waa(const WaaArgs &a) {
  std::istringstream in(read_text(a.results));
  std::vector<riot::DatasetAccuracy> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (riot::trim(line).empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      cells.push_back(riot::trim(cell));
    }
    if (cells.size() != 3) {
      throw Error(ErrorKind::Parse, a.results + ":" + std::to_string(line_no) + ": expected name,N,accuracy");
    }
    try {
      std::size_t used_n = 0;
      std::size_t used_a = 0;
      const long long n = std::stoll(cells[1], &used_n);
      const double acc = std::stod(cells[2], &used_a);
      if (used_n != cells[1].size() || used_a != cells[2].size() || n < 1) {
        throw std::invalid_argument("bad number");
      }
      rows.push_back({static_cast<std::size_t>(n), acc});
    } catch (const std::logic_error &) {
      if (rows.empty() && line_no == 1) {
        continue; // header row
      }
      throw Error(ErrorKind::Parse, a.results + ":" + std::to_string(line_no) + ": N and accuracy must be numbers");
    }
  }
  const double waa = riot::weighted_average_accuracy(rows);
  if (a.json) {
    std::cout << json{{"waa", waa}, {"rounded", one_decimal(waa)}, {"datasets", rows.size()}}.dump(2) << "\n";
  } else {
    std::cout << one_decimal(waa) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// export

struct ExportArgs {
  std::string run;
  std::string format = "json";
  std::string out;
  bool json = false;
};

int cmd_export(const ExportArgs &a) {
  const auto dir = riot::RunDirectory::open(a.run);
  if (!dir.has_tree()) {
    throw Error(ErrorKind::Config, a.run + " has no tree.json yet");
  }
  const auto tree = dir.load_tree();
  std::string doc;
  if (a.format == "json") {
    doc = riot::tree_document(tree);
  } else if (a.format == "dot") {
    doc = riot::export_dot(tree);
  } else {
    throw Error(ErrorKind::Config, "--format must be json or dot");
  }
  if (a.out.empty()) {
    std::cout << doc;
  } else {
    riot::write_file_atomic(a.out, doc);
    if (a.json) {
      std::cout << json{{"written", a.out}, {"format", a.format}, {"nodes", tree.size()}}.dump(2) << "\n";
    }
  }
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"riot: tree-structured prompt optimization with residual fusion"};
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto *optimize = app.add_subcommand("optimize", "Run (or resume) an optimization and write a run directory");
  optimize->add_option("--config", opt.config, "Configuration file (JSON)");
  optimize->add_option("--k", opt.k, "Candidates per iteration (tree width)");
  optimize->add_option("--b1", opt.b1, "Parent retention threshold parameter in [0,1]");
  optimize->add_option("--b2", opt.b2, "Child admission threshold parameter in [0,1]");
  optimize->add_option("--select-metric", opt.metric, "perplexity | entropy | length");
  optimize->add_option("--seed", opt.seed, "Seed for mocks and shuffling");
  optimize->add_option("--run-dir", opt.run_dir, "Output run directory");
  optimize->add_flag("--mock", opt.mock, "Use seeded offline mock providers");
  optimize->add_flag("--no-residual", opt.no_residual, "Replace the parent with the winner instead of fusing");
  optimize->add_option("--resume", opt.resume, "Continue the run stored in this directory");
  optimize->add_option("--stop-after", opt.stop_after, "Stop after this many iterations in this invocation");
  optimize->add_flag("--json", opt.json, "Print the run report as JSON");

  EvaluateArgs ev;
  auto *evaluate = app.add_subcommand("evaluate", "Measure a prompt's accuracy on a dataset split");
  evaluate->add_option("--prompt-file", ev.prompt_file, "Prompt text file")->required();
  evaluate->add_option("--dataset", ev.dataset, "Dataset manifest (JSON)");
  evaluate->add_option("--split", ev.split, "train | validation | test");
  evaluate->add_option("--repeats", ev.repeats, "Independent repetitions (mean and sample std)");
  evaluate->add_option("--config", ev.config, "Configuration file with providers.target");
  evaluate->add_flag("--mock", ev.mock, "Use the seeded mock target");
  evaluate->add_option("--mock-policy", ev.mock_policy, "seeded | oracle | alternating");
  evaluate->add_option("--seed", ev.seed, "Mock seed (repeat r uses seed + r)");
  evaluate->add_option("--records", ev.records, "Where to write per-sample records (JSON lines)");
  evaluate->add_flag("--json", ev.json, "Machine-readable output");

  FuseArgs fu;
  auto *fuse = app.add_subcommand("fuse", "Merge a parent and a child prompt sentence by sentence");
  fuse->add_option("--parent", fu.parent, "Parent prompt file")->required();
  fuse->add_option("--child", fu.child, "Child prompt file")->required();
  fuse->add_option("--b1", fu.b1, "Parent retention threshold parameter in [0,1]");
  fuse->add_option("--b2", fu.b2, "Child admission threshold parameter in [0,1]");
  fuse->add_flag("--trace", fu.trace, "Print the per-sentence keep/drop table");
  fuse->add_option("--vectors", fu.vectors, "JSON object mapping sentences to embedding vectors (mock only)");
  fuse->add_option("--config", fu.config, "Configuration file with providers.embedding");
  fuse->add_option("--seed", fu.seed, "Mock embedding seed");
  fuse->add_flag("--json", fu.json, "Machine-readable output");

  ScoreArgs sc;
  auto *score = app.add_subcommand("score", "Score a prompt by perplexity, entropy or length");
  score->add_option("--prompt-file", sc.prompt_file, "Prompt text file")->required();
  score->add_option("--metric", sc.metric, "perplexity | entropy | length");
  score->add_option("--config", sc.config, "Configuration file with providers.scorer or providers.target");
  score->add_flag("--mock", sc.mock, "Use the mock scorer");
  score->add_option("--seed", sc.seed, "Mock seed");
  score->add_flag("--json", sc.json, "Machine-readable output");

  WaaArgs wa;
  auto *waa = app.add_subcommand("waa", "Weighted average accuracy over datasets");
  waa->add_option("--results", wa.results, "CSV with rows name,N,accuracy")->required();
  waa->add_flag("--json", wa.json, "Machine-readable output");

  ExportArgs ex;
  auto *exp = app.add_subcommand("export", "Export a run's optimization tree");
  exp->add_option("--run", ex.run, "Run directory")->required();
  exp->add_option("--format", ex.format, "json | dot");
  exp->add_option("--out", ex.out, "Output file (default: stdout)");
  exp->add_flag("--json", ex.json, "Machine-readable status output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*optimize) return cmd_optimize(opt);
    if (*evaluate) return cmd_evaluate(ev);
    if (*fuse) return cmd_fuse(fu);
    if (*score) return cmd_score(sc);
    if (*waa) return cmd_waa(wa);
    if (*exp) return cmd_export(ex);
  } catch (const Error &e) {
    std::cerr << "riot: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const json::exception &e) {
    std::cerr << "riot: invalid JSON input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "riot: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
