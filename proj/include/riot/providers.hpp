#pragma once

#include "riot/embedding.hpp"
#include "riot/error.hpp"
#include "riot/scoring.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riot {

using json = nlohmann::json;

enum class Role { System, User, Assistant };

inline std::string_view to_string(Role role) noexcept {
  switch (role) {
  case Role::System: return "system";
  case Role::User: return "user";
  case Role::Assistant: return "assistant";
  }
  return "user";
}

struct Message {
  Role role = Role::User;
  std::string content;
};

struct Capabilities {
  bool chat = false;
  bool embed = false;
  bool score = false;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only request/response log. Writes JSON lines to a file when given a
/// path and always keeps a count; in-memory mode retains the records.
class TranscriptLog {
public:
  TranscriptLog() = default;
  explicit TranscriptLog(const std::filesystem::path &path) : out_(path, std::ios::app) {
    if (!out_) {
      throw Error(ErrorKind::Config, "cannot open transcript log " + path.string());
    }
    to_file_ = true;
  }

  void append(const json &record) {
    std::lock_guard lock(mutex_);
    ++count_;
    if (to_file_) {
      out_ << record.dump() << '\n';
      out_.flush();
    } else {
      records_.push_back(record);
    }
  }

  [[nodiscard]] std::size_t size() const {
    std::lock_guard lock(mutex_);
    return count_;
  }

  [[nodiscard]] std::vector<json> records() const {
    std::lock_guard lock(mutex_);
    return records_;
  }

private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  bool to_file_ = false;
  std::size_t count_ = 0;
  std::vector<json> records_;
};

inline void validate_messages(std::span<const Message> messages) {
  if (messages.empty()) {
    throw Error(ErrorKind::InvalidArgument, "chat request needs at least one message");
  }
}

inline json messages_to_json(std::span<const Message> messages) {
  json arr = json::array();
  for (const auto &m : messages) {
    arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return arr;
}

/// A model backend. Each operation is available only when advertised in
/// capabilities(); otherwise it throws UnsupportedByBackend.
class Provider {
public:
  virtual ~Provider() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Capabilities capabilities() const = 0;

  virtual std::string chat_complete(std::span<const Message> messages, std::optional<std::uint64_t> nonce) {
    (void)messages;
    (void)nonce;
    throw Error(ErrorKind::UnsupportedByBackend, name() + " does not support chat");
  }

  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) {
    (void)texts;
    throw Error(ErrorKind::UnsupportedByBackend, name() + " does not support embeddings");
  }

  virtual std::vector<TokenLogprob> token_logprobs(std::string_view text) {
    (void)text;
    throw Error(ErrorKind::UnsupportedByBackend,
                name() + " cannot score prompt tokens; configure a completions endpoint with echo+logprobs");
  }

  void set_transcript(std::shared_ptr<TranscriptLog> log) { transcript_ = std::move(log); }
  [[nodiscard]] const std::shared_ptr<TranscriptLog> &transcript() const noexcept { return transcript_; }

protected:
  void record(json entry) const {
    if (transcript_) {
      entry["provider"] = name();
      transcript_->append(entry);
    }
  }

private:
  std::shared_ptr<TranscriptLog> transcript_;
};

} // namespace riot
