#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riot {

struct Sentence {
  std::string text;
  std::size_t source_index = 0;

  friend bool operator==(const Sentence &, const Sentence &) = default;
};

namespace detail {

inline bool is_space(char c) noexcept {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline bool is_terminal(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

inline bool is_closer(char c) noexcept {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}

// Opening quotes that may start a new sentence: ASCII quotes and the UTF-8
// curly quotes U+2018 / U+201C.
inline bool starts_with_quote(std::string_view s) noexcept {
  if (s.empty()) {
    return false;
  }
  if (s.front() == '"' || s.front() == '\'') {
    return true;
  }
  return s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xE2 &&
         static_cast<unsigned char>(s[1]) == 0x80 &&
         (static_cast<unsigned char>(s[2]) == 0x98 || static_cast<unsigned char>(s[2]) == 0x9C);
}

inline bool opens_sentence(std::string_view rest) noexcept {
  if (rest.empty()) {
    return true;
  }
  const auto c = static_cast<unsigned char>(rest.front());
  return std::isupper(c) || std::isdigit(c) || starts_with_quote(rest);
}

inline constexpr std::array<std::string_view, 6> kAbbreviations = {"e.g.", "i.e.", "mr.", "dr.", "vs.", "etc."};

// Word ending at (and including) position `end`.
inline bool is_abbreviation(std::string_view text, std::size_t end) {
  std::size_t begin = end;
  while (begin > 0 && !is_space(text[begin - 1])) {
    --begin;
  }
  std::string word(text.substr(begin, end - begin + 1));
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  // Allow an opening bracket or quote glued to the word, e.g. "(e.g."
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
    word.erase(word.begin());
  }
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

} // namespace detail

/// Collapses whitespace runs to a single space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (detail::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

/// Rule-based sentence splitter. A boundary follows '.', '!' or '?' (plus any
/// closing quotes/brackets) when the next character after the space is an
/// uppercase letter, a digit, an opening quote, or the end of the text. A
/// fixed list of abbreviations never ends a sentence. The end of the text
/// always closes the last sentence, so "Answer: YES" is a unit of its own.
inline std::vector<Sentence> split_sentences(std::string_view prompt_text) {
  const std::string text = normalize_whitespace(prompt_text);
  std::vector<Sentence> sentences;
  const std::string_view view(text);

  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    if (end > start) {
      sentences.push_back({std::string(view.substr(start, end - start)), sentences.size()});
    }
  };

  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!detail::is_terminal(view[i])) {
      continue;
    }
    std::size_t j = i + 1;
    while (j < view.size() && (detail::is_terminal(view[j]) || detail::is_closer(view[j]))) {
      ++j;
    }
    if (j < view.size() && view[j] != ' ') {
      i = j - 1;
      continue;
    }
    if (j < view.size() && !detail::opens_sentence(view.substr(j + 1))) {
      i = j - 1;
      continue;
    }
    if (view[i] == '.' && detail::is_abbreviation(view, i)) {
      continue;
    }
    emit(j);
    start = j + 1;
    i = j;
  }
  if (start < view.size()) {
    emit(view.size());
  }
  return sentences;
}

inline std::string join_sentences(std::span<const Sentence> sentences) {
  std::string out;
  for (const auto &s : sentences) {
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += s.text;
  }
  return out;
}

inline std::string join_sentences(const std::vector<Sentence> &sentences) {
  return join_sentences(std::span<const Sentence>(sentences));
}

} // namespace riot
