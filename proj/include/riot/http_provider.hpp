#pragma once

#include "riot/embedding.hpp"
#include "riot/error.hpp"
#include "riot/providers.hpp"
#include "riot/scoring.hpp"

#include "httplib.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

namespace riot {

struct ProviderConfig {
  std::string base_url;
  std::string model_name;
  /// Name of the environment variable holding the API key; empty for keyless servers.
  std::string api_key_env;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::size_t parallelism = 4;
  Capabilities capabilities{true, false, false};
  std::size_t embed_batch_limit = 64;
  std::chrono::milliseconds backoff_initial{500};

  void validate() const {
    if (base_url.empty()) throw Error(ErrorKind::Config, "provider base_url is empty");
    if (model_name.empty()) throw Error(ErrorKind::Config, "provider model name is empty");
    if (temperature < 0.0) throw Error(ErrorKind::Config, "temperature must be >= 0");
    if (max_retries < 0) throw Error(ErrorKind::Config, "max_retries must be >= 0");
    if (parallelism < 1) throw Error(ErrorKind::Config, "parallelism must be >= 1");
    if (embed_batch_limit < 1) throw Error(ErrorKind::Config, "embed_batch_limit must be >= 1");
  }
};

/// Client for OpenAI-compatible endpoints: POST {base}/chat/completions,
/// {base}/embeddings, and {base}/completions with echo+logprobs for scoring.
class HttpProvider final : public Provider {
public:
  explicit HttpProvider(ProviderConfig config)
      : config_(std::move(config)), slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.parallelism))) {
    config_.validate();
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorKind::Config, "base_url needs a scheme: " + config_.base_url);
    }
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    origin_ = config_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') {
      prefix_.pop_back();
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) {
      throw Error(ErrorKind::Config, "this build has no TLS support; cannot use " + origin_);
    }
#endif
  }

  [[nodiscard]] std::string name() const override { return "http:" + config_.model_name; }
  [[nodiscard]] Capabilities capabilities() const override { return config_.capabilities; }
  [[nodiscard]] const ProviderConfig &config() const noexcept { return config_; }

  /// Process-wide count of HTTP requests actually sent.
  static std::size_t requests_sent() noexcept { return sent_counter().load(); }

  std::string chat_complete(std::span<const Message> messages, std::optional<std::uint64_t> nonce) override {
    if (!config_.capabilities.chat) {
      return Provider::chat_complete(messages, nonce);
    }
    validate_messages(messages);
    json body = {{"model", config_.model_name},
                 {"messages", messages_to_json(messages)},
                 {"temperature", config_.temperature}};
    if (nonce) {
      body["seed"] = *nonce;
    }
    const json reply = post("chat", "/chat/completions", body);
    try {
      const auto &content = reply.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception &e) {
      throw Error(ErrorKind::MalformedResponse, std::string("chat response: ") + e.what());
    }
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    if (!config_.capabilities.embed) {
      return Provider::embed(texts);
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].empty()) {
        throw Error(ErrorKind::IndexedInput, "empty text at index " + std::to_string(i));
      }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += config_.embed_batch_limit) {
      const auto chunk = texts.subspan(begin, std::min(config_.embed_batch_limit, texts.size() - begin));
      json input = json::array();
      for (const auto &t : chunk) {
        input.push_back(t);
      }
      const json reply = post("embed", "/embeddings", {{"model", config_.model_name}, {"input", input}});
      std::vector<std::optional<EmbeddingVector>> ordered(chunk.size());
      try {
        const auto &data = reply.at("data");
        if (data.size() != chunk.size()) {
          throw Error(ErrorKind::MalformedResponse, "embeddings response has " + std::to_string(data.size()) +
                                                        " items for " + std::to_string(chunk.size()) + " inputs");
        }
        for (std::size_t k = 0; k < data.size(); ++k) {
          const std::size_t idx = data[k].contains("index") ? data[k].at("index").get<std::size_t>() : k;
          if (idx >= chunk.size() || ordered[idx]) {
            throw Error(ErrorKind::MalformedResponse, "embeddings response has a bad index");
          }
          ordered[idx] = EmbeddingVector(data[k].at("embedding").get<std::vector<double>>());
        }
      } catch (const json::exception &e) {
        throw Error(ErrorKind::MalformedResponse, std::string("embeddings response: ") + e.what());
      }
      for (auto &v : ordered) {
        if (!out.empty() && v->dimension() != out.front().dimension()) {
          throw Error(ErrorKind::DimensionMismatch, "embedding dimensions differ within one request");
        }
        out.push_back(std::move(*v));
      }
    }
    return out;
  }

  std::vector<TokenLogprob> token_logprobs(std::string_view text) override {
    if (!config_.capabilities.score) {
      return Provider::token_logprobs(text);
    }
    if (text.empty()) {
      throw Error(ErrorKind::InvalidArgument, "cannot score empty text");
    }
    const json reply = post("score", "/completions",
                            {{"model", config_.model_name},
                             {"prompt", std::string(text)},
                             {"max_tokens", 0},
                             {"echo", true},
                             {"logprobs", 1},
                             {"temperature", 0.0}});
    std::vector<TokenLogprob> out;
    try {
      const auto &lp = reply.at("choices").at(0).at("logprobs");
      const auto &tokens = lp.at("tokens");
      const auto &values = lp.at("token_logprobs");
      if (tokens.size() != values.size()) {
        throw Error(ErrorKind::MalformedResponse, "tokens and token_logprobs differ in length");
      }
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].is_null()) {
          continue; // first token has no conditional probability on most servers
        }
        double v = values[i].get<double>();
        if (v > 0.0 && v < 1e-6) {
          v = 0.0;
        }
        out.emplace_back(tokens[i].get<std::string>(), v);
      }
    } catch (const json::exception &e) {
      throw Error(ErrorKind::MalformedResponse, std::string("completions logprobs: ") + e.what());
    } catch (const Error &e) {
      if (e.kind() == ErrorKind::InvalidArgument) {
        throw Error(ErrorKind::MalformedResponse, e.what());
      }
      throw;
    }
    return out;
  }

private:
  static std::atomic<std::size_t> &sent_counter() {
    static std::atomic<std::size_t> counter{0};
    return counter;
  }

  struct SlotGuard {
    std::counting_semaphore<> &sem;
    explicit SlotGuard(std::counting_semaphore<> &s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
  };

  [[nodiscard]] httplib::Headers headers() const {
    httplib::Headers h;
    if (!config_.api_key_env.empty()) {
      const char *key = std::getenv(config_.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw Error(ErrorKind::Auth, "environment variable " + config_.api_key_env + " is not set");
      }
      h.emplace("Authorization", std::string("Bearer ") + key);
    }
    return h;
  }

  static bool retryable(ErrorKind k) noexcept {
    return k == ErrorKind::RateLimited || k == ErrorKind::Timeout || k == ErrorKind::Backend;
  }

  json post(const char *kind, const std::string &endpoint, const json &body) {
    const auto hdrs = headers(); // AuthError before any network traffic
    const std::string path = prefix_ + endpoint;
    const std::string payload = body.dump();
    const auto started = std::chrono::steady_clock::now();
    const std::string started_at = utc_timestamp();

    json entry = {{"kind", kind}, {"started_at", started_at}, {"endpoint", path}, {"request", body}};
    int attempts = 0;
    for (;;) {
      ++attempts;
      std::optional<Error> failure;
      bool can_retry = false;
      try {
        json reply = attempt(path, hdrs, payload);
        entry["attempts"] = attempts;
        entry["latency_ms"] = elapsed_ms(started);
        entry["response"] = reply;
        record(std::move(entry));
        return reply;
      } catch (const Error &e) {
        failure = e;
        can_retry = retryable(e.kind());
      }
      if (!can_retry || attempts > config_.max_retries) {
        entry["attempts"] = attempts;
        entry["latency_ms"] = elapsed_ms(started);
        entry["error"] = failure->what();
        record(std::move(entry));
        throw *failure;
      }
      std::this_thread::sleep_for(config_.backoff_initial * (1LL << std::min(attempts - 1, 16)));
    }
  }

  json attempt(const std::string &path, const httplib::Headers &hdrs, const std::string &payload) {
    SlotGuard slot(slots_);
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    ++sent_counter();
    auto res = client.Post(path, hdrs, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw Error(ErrorKind::Timeout, origin_ + path + ": " + httplib::to_string(err));
      }
      throw Error(ErrorKind::Backend, origin_ + path + ": " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::Auth, "HTTP " + std::to_string(status) + " from " + path);
    }
    if (status == 429) {
      throw Error(ErrorKind::RateLimited, "HTTP 429 from " + path);
    }
    if (status == 408 || status == 504) {
      throw Error(ErrorKind::Timeout, "HTTP " + std::to_string(status) + " from " + path);
    }
    if (status >= 500) {
      throw Error(ErrorKind::Backend, "HTTP " + std::to_string(status) + " from " + path);
    }
    if (status != 200) {
      // Non-retryable client error; reported as malformed request/response.
      throw Error(ErrorKind::MalformedResponse, "HTTP " + std::to_string(status) + " from " + path + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error &e) {
      throw Error(ErrorKind::MalformedResponse, path + " returned invalid JSON: " + e.what());
    }
  }

  static double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
  }

  ProviderConfig config_;
  std::string origin_;
  std::string prefix_;
  std::counting_semaphore<> slots_;
};

} // namespace riot
