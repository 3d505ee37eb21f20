#pragma once

#include "riot/hash.hpp"
#include "riot/providers.hpp"
#include "riot/segmentation.hpp"
#include "riot/template.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace riot {

/// How the mock answers task questions when it plays the target model.
enum class MockAnswerPolicy {
  Seeded,      // correctness is a keyed-hash coin flip biased by the prompt text
  Oracle,      // always the ground truth
  Alternating, // correct on even sample ordinals, wrong on odd ones
  Echo,        // returns the last user message verbatim
};

struct MockAnswer {
  std::string correct;
  std::string wrong;
  std::size_t ordinal = 0;
};

namespace detail {

inline std::string hex8(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(8, '0');
  for (int i = 7; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline std::optional<std::string> tagged(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto b = text.find(open);
  if (b == std::string_view::npos) {
    return std::nullopt;
  }
  const auto e = text.find(close, b + open.size());
  if (e == std::string_view::npos) {
    return std::nullopt;
  }
  return trim(text.substr(b + open.size(), e - b - open.size()));
}

inline std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }
  return words;
}

inline constexpr std::array<std::string_view, 24> kInstructionBank = {
    "Read the question carefully and restate what is being asked.",
    "List the known quantities before doing any calculation.",
    "Break the problem into smaller steps and solve each one in order.",
    "Check every intermediate result before moving on.",
    "Write out each arithmetic operation explicitly.",
    "Identify any hidden assumptions in the question.",
    "Eliminate answer options that contradict the given facts.",
    "Keep track of units throughout the calculation.",
    "Verify the final answer against the original question.",
    "Do not skip steps even when they seem obvious.",
    "Consider edge cases such as zero or negative values.",
    "Count each item exactly once when enumerating objects.",
    "Convert dates into a consistent format before comparing them.",
    "State which facts support the conclusion and which do not.",
    "When unsure, recompute the result using a different method.",
    "Summarize the key reasoning in one sentence before answering.",
    "Pay attention to words such as not, only and except.",
    "Separate the relevant information from distracting details.",
    "Round numbers only at the very end of the computation.",
    "Make sure the answer format matches the required output exactly.",
    "Use commonsense knowledge only when the facts are silent.",
    "Compare each answer option with the computed result.",
    "Translate the word problem into equations first.",
    "Double-check the direction of every comparison.",
};

} // namespace detail

/// Deterministic offline backend. Every output is a pure function of the
/// request contents, the nonce and the seed.
class MockProvider final : public Provider {
public:
  explicit MockProvider(std::uint64_t seed = 0, std::size_t embedding_dim = 64)
      : seed_(seed), dim_(embedding_dim) {}

  [[nodiscard]] std::string name() const override { return "mock"; }
  [[nodiscard]] Capabilities capabilities() const override { return {true, true, true}; }

  void set_answer_policy(MockAnswerPolicy policy) { policy_ = policy; }
  void set_answer_key(std::map<std::string, MockAnswer, std::less<>> key) { answer_key_ = std::move(key); }
  /// Every chat call returns this text instead of the generated one.
  void set_canned_response(std::optional<std::string> text) { canned_ = std::move(text); }
  /// Hand-built vectors that take precedence over hashing.
  void set_embedding_overrides(std::unordered_map<std::string, std::vector<double>> overrides) {
    overrides_ = std::move(overrides);
  }

  std::string chat_complete(std::span<const Message> messages, std::optional<std::uint64_t> nonce) override {
    validate_messages(messages);
    std::string reply = generate(messages, nonce);
    record({{"kind", "chat"},
            {"request", {{"messages", messages_to_json(messages)}, {"nonce", nonce ? json(*nonce) : json(nullptr)}}},
            {"response", {{"text", reply}}},
            {"attempts", 1}});
    return reply;
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].empty()) {
        throw Error(ErrorKind::IndexedInput, "empty text at index " + std::to_string(i));
      }
      out.push_back(embed_one(texts[i]));
    }
    record({{"kind", "embed"}, {"request", {{"count", texts.size()}}}, {"attempts", 1}});
    return out;
  }

  std::vector<TokenLogprob> token_logprobs(std::string_view text) override {
    if (trim(text).empty()) {
      throw Error(ErrorKind::InvalidArgument, "cannot score empty text");
    }
    std::vector<TokenLogprob> out;
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
        ++j;
      }
      if (j > i) {
        out.push_back(mock_token_logprob(text.substr(i, j - i)));
      }
      i = j;
    }
    record({{"kind", "score"}, {"request", {{"chars", text.size()}}}, {"attempts", 1}});
    return out;
  }

  /// Scoring rule: logprob(token) = -((fnv1a(token) mod 5) + 1) / 2.
  static TokenLogprob mock_token_logprob(std::string_view token) {
    const double lp = -static_cast<double>((hash::fnv1a(token) % 5) + 1) / 2.0;
    return TokenLogprob(std::string(token), lp);
  }

  [[nodiscard]] EmbeddingVector embed_one(const std::string &text) const {
    if (auto it = overrides_.find(text); it != overrides_.end()) {
      return EmbeddingVector(it->second);
    }
    std::vector<double> v(dim_, 0.0);
    auto words = detail::words_of(text);
    if (words.empty()) {
      words.push_back(text);
    }
    for (const auto &w : words) {
      std::uint64_t state = hash::keyed(w, seed_ ^ 0xE1B0ULL);
      for (std::size_t k = 0; k < dim_; ++k) {
        state = hash::splitmix64(state);
        v[k] += 2.0 * hash::unit_interval(state) - 1.0;
      }
    }
    double norm = 0.0;
    for (double x : v) {
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double &x : v) {
      x /= norm;
    }
    return EmbeddingVector(std::move(v));
  }

private:
  [[nodiscard]] std::uint64_t digest(std::span<const Message> messages) const {
    std::uint64_t h = seed_;
    for (const auto &m : messages) {
      h = hash::combine(h, static_cast<std::uint64_t>(m.role));
      h = hash::combine(h, hash::fnv1a(m.content));
    }
    return h;
  }

  std::string generate(std::span<const Message> messages, std::optional<std::uint64_t> nonce) const {
    if (canned_) {
      return *canned_;
    }
    const std::string &last = messages.back().content;
    if (policy_ == MockAnswerPolicy::Echo) {
      return last;
    }
    const std::uint64_t h = hash::combine(digest(messages), nonce.value_or(0x9E37ULL));

    auto parent = detail::tagged(last, "parent");
    auto child = detail::tagged(last, "child");
    if (parent && child) {
      return merge(*parent, *child);
    }
    if (auto prompt = detail::tagged(last, "prompt")) {
      if (auto feedback = detail::tagged(last, "feedback")) {
        return mutate(*prompt, *feedback, nonce.value_or(0), h);
      }
      return critique(*prompt, detail::tagged(last, "failures").value_or(""), h);
    }
    return answer(messages);
  }

  static std::string merge(const std::string &parent, const std::string &child) {
    auto kept = split_sentences(parent);
    const auto child_sentences = split_sentences(child);
    std::erase_if(kept, [&](const Sentence &s) {
      return std::none_of(child_sentences.begin(), child_sentences.end(),
                          [&](const Sentence &c) { return c.text == s.text; });
    });
    for (const auto &c : child_sentences) {
      if (std::none_of(kept.begin(), kept.end(), [&](const Sentence &s) { return s.text == c.text; })) {
        kept.push_back(c);
      }
    }
    return join_sentences(kept);
  }

  std::string critique(const std::string &prompt, const std::string &failures, std::uint64_t h) const {
    std::size_t failed = 0;
    for (std::size_t pos = failures.find("id: "); pos != std::string::npos; pos = failures.find("id: ", pos + 1)) {
      ++failed;
    }
    const auto &advice = detail::kInstructionBank[h % detail::kInstructionBank.size()];
    std::string out = "Feedback " + detail::hex8(h) + ": ";
    if (failed == 0) {
      out += "the prompt handled every sample in the batch.";
    } else {
      out += "the prompt led to " + std::to_string(failed) + " wrong answer(s).";
    }
    out += " It should tell the model: \"" + std::string(advice) + "\"";
    out += " The prompt currently has " + std::to_string(split_sentences(prompt).size()) + " sentences.";
    return out;
  }

  std::string mutate(const std::string &prompt, const std::string &feedback, std::uint64_t nonce,
                     std::uint64_t h) const {
    auto sentences = split_sentences(prompt);
    std::vector<std::string_view> available;
    for (auto s : detail::kInstructionBank) {
      if (std::none_of(sentences.begin(), sentences.end(), [&](const Sentence &x) { return x.text == s; })) {
        available.push_back(s);
      }
    }
    // Nonce-independent base so that distinct nonces pick distinct additions.
    const std::uint64_t base = hash::combine(hash::keyed(prompt, seed_), hash::fnv1a(feedback));
    std::string addition;
    if (!available.empty()) {
      addition = std::string(available[(base + nonce) % available.size()]);
    } else {
      addition = "Double-check intermediate result number " + std::to_string((base + nonce) % 1000003) +
                 " before answering.";
    }

    Sentence added{addition, 0};
    switch ((h >> 17) % 3) {
    case 0:
      sentences.push_back(added);
      break;
    case 1:
      sentences.insert(sentences.end() - (sentences.empty() ? 0 : 1), added);
      break;
    default:
      if (sentences.size() >= 2) {
        // Replace an instruction other than the trailing format line.
        sentences[(h >> 23) % (sentences.size() - 1)] = added;
      } else {
        sentences.push_back(added);
      }
      break;
    }
    return join_sentences(sentences);
  }

  std::string answer(std::span<const Message> messages) const {
    std::string system;
    std::string question;
    for (const auto &m : messages) {
      if (m.role == Role::System) {
        system = m.content;
      } else if (m.role == Role::User) {
        question = m.content;
      }
    }
    const auto it = answer_key_.find(question);
    if (it == answer_key_.end()) {
      return "I could not determine the answer.\nAnswer: UNKNOWN";
    }
    bool correct = true;
    switch (policy_) {
    case MockAnswerPolicy::Oracle:
      correct = true;
      break;
    case MockAnswerPolicy::Alternating:
      correct = it->second.ordinal % 2 == 0;
      break;
    default: {
      const double skill = 0.35 + 0.55 * hash::unit_interval(hash::keyed(system, seed_ ^ 0x7A3CULL));
      const double draw = hash::unit_interval(hash::keyed(system + '\x1f' + question, seed_ ^ 0x5EEDULL));
      correct = draw < skill;
      break;
    }
    }
    return "Let me think step by step.\nAnswer: " + (correct ? it->second.correct : it->second.wrong);
  }

  std::uint64_t seed_;
  std::size_t dim_;
  MockAnswerPolicy policy_ = MockAnswerPolicy::Seeded;
  std::map<std::string, MockAnswer, std::less<>> answer_key_;
  std::optional<std::string> canned_;
  std::unordered_map<std::string, std::vector<double>> overrides_;
};

} // namespace riot
