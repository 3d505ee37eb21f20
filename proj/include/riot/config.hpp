#pragma once

#include "riot/assets.hpp"
#include "riot/engine.hpp"
#include "riot/error.hpp"
#include "riot/http_provider.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace riot {

/// Configuration document for the command-line tool. Unknown keys are
/// rejected; to_json() writes back the effective configuration with every
/// default filled in.
struct CliConfig {
  RunConfig run;
  std::optional<std::string> task;
  std::filesystem::path dataset;
  std::filesystem::path run_dir = "riot-run";
  bool mock = false;
  std::map<std::string, std::filesystem::path> templates; // gradient / proposal / fusion
  std::map<std::string, ProviderConfig> providers;        // target / optimizer / embedding / scorer

  void validate() const {
    run.validate();
    if (dataset.empty()) {
      throw Error(ErrorKind::Config, "no dataset manifest configured");
    }
    if (!mock) {
      for (const char *role : {"target", "optimizer", "embedding"}) {
        if (!providers.contains(role)) {
          throw Error(ErrorKind::Config, std::string("providers.") + role + " is required unless running with --mock");
        }
      }
    }
  }
};

namespace detail {

inline void reject_unknown(const json &obj, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!obj.is_object()) {
    throw Error(ErrorKind::Config, where + " must be an object");
  }
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[key, value] : obj.items()) {
    if (!ok.contains(key)) {
      throw Error(ErrorKind::Config, "unknown key \"" + key + "\" in " + where);
    }
  }
}

template <class T> void read(const json &obj, const char *key, T &into, const std::string &where) {
  if (!obj.contains(key)) {
    return;
  }
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception &) {
    throw Error(ErrorKind::Config, where + "." + key + " has the wrong type");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline ProviderConfig provider_from_json(const json &j, const std::string &where) {
  reject_unknown(j,
                 {"base_url", "model", "api_key_env", "temperature", "timeout_ms", "max_retries", "parallelism",
                  "capabilities", "embed_batch_limit", "backoff_ms"},
                 where);
  ProviderConfig c;
  read(j, "base_url", c.base_url, where);
  read(j, "model", c.model_name, where);
  read(j, "api_key_env", c.api_key_env, where);
  read(j, "temperature", c.temperature, where);
  long long timeout = c.timeout.count();
  read(j, "timeout_ms", timeout, where);
  c.timeout = std::chrono::milliseconds(timeout);
  read(j, "max_retries", c.max_retries, where);
  read(j, "parallelism", c.parallelism, where);
  read(j, "embed_batch_limit", c.embed_batch_limit, where);
  long long backoff = c.backoff_initial.count();
  read(j, "backoff_ms", backoff, where);
  c.backoff_initial = std::chrono::milliseconds(backoff);
  if (j.contains("capabilities")) {
    c.capabilities = {};
    for (const auto &cap : j.at("capabilities")) {
      const auto s = cap.get<std::string>();
      if (s == "chat") c.capabilities.chat = true;
      else if (s == "embed") c.capabilities.embed = true;
      else if (s == "score") c.capabilities.score = true;
      else throw Error(ErrorKind::Config, where + ".capabilities: unknown capability \"" + s + "\"");
    }
  }
  c.validate();
  return c;
}

inline json provider_to_json(const ProviderConfig &c) {
  json caps = json::array();
  if (c.capabilities.chat) caps.push_back("chat");
  if (c.capabilities.embed) caps.push_back("embed");
  if (c.capabilities.score) caps.push_back("score");
  return {{"base_url", c.base_url},
          {"model", c.model_name},
          {"api_key_env", c.api_key_env},
          {"temperature", c.temperature},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.max_retries},
          {"parallelism", c.parallelism},
          {"capabilities", caps},
          {"embed_batch_limit", c.embed_batch_limit},
          {"backoff_ms", c.backoff_initial.count()}};
}

inline CliConfig parse_config(const json &j, const std::filesystem::path &base_dir) {
  const std::string where = "config";
  reject_unknown(j,
                 {"task", "initial_prompt", "initial_prompt_file", "dataset", "run_dir", "k", "batch_size",
                          "epochs", "select_metric", "seed", "no_residual", "shuffle", "fusion_mode", "parallelism",
                          "fusion", "templates", "mock", "providers"},
                         where);
  CliConfig c;
  if (j.contains("task")) {
    c.task = j.at("task").get<std::string>();
    if (auto p = assets::initial_prompt(*c.task)) {
      c.run.initial_prompt = std::string(*p);
    } else {
      throw Error(ErrorKind::Config, "unknown task \"" + *c.task + "\"");
    }
  }
  if (j.contains("initial_prompt_file")) {
    std::ifstream in(detail::resolve(base_dir, j.at("initial_prompt_file").get<std::string>()));
    if (!in) {
      throw Error(ErrorKind::Config, "cannot read initial_prompt_file");
    }
    c.run.initial_prompt.assign(std::istreambuf_iterator<char>(in), {});
  }
  read(j, "initial_prompt", c.run.initial_prompt, where);
  if (j.contains("dataset")) {
    c.dataset = detail::resolve(base_dir, j.at("dataset").get<std::string>());
  }
  if (j.contains("run_dir")) {
    c.run_dir = detail::resolve(base_dir, j.at("run_dir").get<std::string>());
  }
  read(j, "k", c.run.k, where);
  read(j, "batch_size", c.run.batch_size, where);
  read(j, "epochs", c.run.epochs, where);
  read(j, "seed", c.run.seed, where);
  read(j, "no_residual", c.run.no_residual, where);
  read(j, "shuffle", c.run.shuffle, where);
  read(j, "parallelism", c.run.parallelism, where);
  read(j, "mock", c.mock, where);
  if (j.contains("select_metric")) {
    const auto m = parse_metric(j.at("select_metric").get<std::string>());
    if (!m) {
      throw Error(ErrorKind::Config, "select_metric must be perplexity, entropy or length");
    }
    c.run.metric = *m;
  }
  if (j.contains("fusion_mode")) {
    const auto m = j.at("fusion_mode").get<std::string>();
    if (m == "sentence") c.run.fusion_mode = FusionMode::Sentence;
    else if (m == "llm") c.run.fusion_mode = FusionMode::Llm;
    else throw Error(ErrorKind::Config, "fusion_mode must be sentence or llm");
  }
  if (j.contains("fusion")) {
    detail::reject_unknown(j.at("fusion"), {"b1", "b2"}, "config.fusion");
    read(j.at("fusion"), "b1", c.run.fusion.b1, "config.fusion");
    read(j.at("fusion"), "b2", c.run.fusion.b2, "config.fusion");
  }
  if (j.contains("templates")) {
    detail::reject_unknown(j.at("templates"), {"gradient", "proposal", "fusion"}, "config.templates");
    for (const auto &[name, path] : j.at("templates").items()) {
      c.templates[name] = detail::resolve(base_dir, path.get<std::string>());
    }
  }
  if (j.contains("providers")) {
    detail::reject_unknown(j.at("providers"), {"target", "optimizer", "embedding", "scorer"}, "config.providers");
    for (const auto &[role, p] : j.at("providers").items()) {
      c.providers[role] = detail::provider_from_json(p, "config.providers." + role);
    }
  }
  return c;
}

} // namespace detail

/// Parses a configuration document. Relative paths resolve against base_dir.
inline CliConfig config_from_json(const json &j, const std::filesystem::path &base_dir = {}) {
  try {
    return detail::parse_config(j, base_dir);
  } catch (const json::exception &e) {
    throw Error(ErrorKind::Config, std::string("config has a value of the wrong type: ") + e.what());
  }
}

inline CliConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Config, "cannot open config " + path.string());
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline json to_json(const CliConfig &c) {
  json templates = json::object();
  for (const auto &[name, path] : c.templates) {
    templates[name] = path.string();
  }
  json providers = json::object();
  for (const auto &[role, p] : c.providers) {
    providers[role] = detail::provider_to_json(p);
  }
  json j = {{"initial_prompt", c.run.initial_prompt},
            {"dataset", c.dataset.string()},
            {"run_dir", c.run_dir.string()},
            {"k", c.run.k},
            {"batch_size", c.run.batch_size},
            {"epochs", c.run.epochs},
            {"select_metric", to_string(c.run.metric)},
            {"seed", c.run.seed},
            {"no_residual", c.run.no_residual},
            {"shuffle", c.run.shuffle},
            {"fusion_mode", c.run.fusion_mode == FusionMode::Llm ? "llm" : "sentence"},
            {"parallelism", c.run.parallelism},
            {"fusion", {{"b1", c.run.fusion.b1}, {"b2", c.run.fusion.b2}}},
            {"templates", templates},
            {"mock", c.mock},
            {"providers", providers}};
  if (c.task) {
    j["task"] = *c.task;
  }
  return j;
}

} // namespace riot
