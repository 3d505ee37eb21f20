#pragma once

#include "riot/evaluation.hpp"
#include "riot/providers.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace riot::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag = "riot") {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  [[nodiscard]] const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline std::filesystem::path source_dir() { return RIOT_SOURCE_DIR; }

/// Synthetic arithmetic dataset: "x + y" questions with numeric answers.
inline Dataset synthetic_dataset(std::size_t train, std::size_t validation, std::size_t test,
                                 AnswerFormat format = AnswerFormat::Numeric) {
  Dataset d;
  d.name = "synthetic";
  d.answer_spec.format = format;
  auto make = [&](const std::string &split, std::size_t n) {
    std::vector<TaskSample> out;
    for (std::size_t i = 0; i < n; ++i) {
      TaskSample s;
      s.id = split + "-" + std::to_string(i);
      const auto a = 3 * i + 1;
      const auto b = 7 * i + 2;
      if (format == AnswerFormat::TrueFalse) {
        s.question = "Is " + std::to_string(a) + " smaller than " + std::to_string(b) + "? (" + s.id + ")";
        s.ground_truth = "YES";
      } else {
        s.question = "What is " + std::to_string(a) + " + " + std::to_string(b) + "? (" + s.id + ")";
        s.ground_truth = std::to_string(a + b);
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  d.train = make("train", train);
  d.validation = make("validation", validation);
  d.test = make("test", test);
  return d;
}

/// Writes a dataset to JSONL files plus manifest; returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path &dir, const Dataset &d) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"name", d.name},
                             {"format", std::string(to_string(d.answer_spec.format))},
                             {"splits", {{"train", "train.jsonl"}, {"validation", "validation.jsonl"}, {"test", "test.jsonl"}}}};
  auto dump = [&](const std::string &file, const std::vector<TaskSample> &samples) {
    std::ofstream out(dir / file);
    for (const auto &s : samples) {
      nlohmann::json j = {{"id", s.id}, {"question", s.question}, {"answer", s.ground_truth}};
      if (!s.choices.empty()) {
        j["choices"] = nlohmann::json::array();
        for (const auto &c : s.choices) {
          j["choices"].push_back({{"letter", c.letter}, {"text", c.text}});
        }
      }
      out << j.dump() << "\n";
    }
  };
  dump("train.jsonl", d.train);
  dump("validation.jsonl", d.validation);
  dump("test.jsonl", d.test);
  write_text(dir / "manifest.json", manifest.dump(2));
  return dir / "manifest.json";
}

/// Loopback HTTP server for wire-format tests. Register handlers before start().
class StubServer {
public:
  httplib::Server server;

  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) {
      throw std::runtime_error("stub server could not bind a loopback port");
    }
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    if (thread_.joinable()) {
      thread_.join();
    }
  }

  [[nodiscard]] std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
  int port_ = -1;
  std::thread thread_;
};

/// Provider that fails or answers through user-supplied callbacks.
class ScriptedProvider : public Provider {
public:
  std::function<std::string(std::span<const Message>, std::optional<std::uint64_t>)> on_chat;
  std::function<std::vector<TokenLogprob>(std::string_view)> on_score;
  Capabilities caps{true, false, false};

  [[nodiscard]] std::string name() const override { return "scripted"; }
  [[nodiscard]] Capabilities capabilities() const override { return caps; }
  std::string chat_complete(std::span<const Message> messages, std::optional<std::uint64_t> nonce) override {
    validate_messages(messages);
    if (!on_chat) {
      return Provider::chat_complete(messages, nonce);
    }
    return on_chat(messages, nonce);
  }
  std::vector<TokenLogprob> token_logprobs(std::string_view text) override {
    if (!on_score) {
      return Provider::token_logprobs(text);
    }
    return on_score(text);
  }
};

} // namespace riot::testing
