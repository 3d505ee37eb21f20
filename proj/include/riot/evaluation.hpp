#pragma once

#include "riot/error.hpp"
#include "riot/mock_provider.hpp"
#include "riot/parallel.hpp"
#include "riot/providers.hpp"
#include "riot/template.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riot {

enum class AnswerFormat { TrueFalse, Numeric, MultipleChoice };

inline std::string_view to_string(AnswerFormat f) noexcept {
  switch (f) {
  case AnswerFormat::TrueFalse: return "true_false";
  case AnswerFormat::Numeric: return "numeric";
  case AnswerFormat::MultipleChoice: return "multiple_choice";
  }
  return "numeric";
}

inline std::optional<AnswerFormat> parse_answer_format(std::string_view s) noexcept {
  if (s == "true_false") return AnswerFormat::TrueFalse;
  if (s == "numeric") return AnswerFormat::Numeric;
  if (s == "multiple_choice") return AnswerFormat::MultipleChoice;
  return std::nullopt;
}

struct AnswerSpec {
  AnswerFormat format = AnswerFormat::Numeric;
  std::string marker = "Answer:";
};

struct Choice {
  std::string letter;
  std::string text;
};

struct TaskSample {
  std::string id;
  std::string question;
  std::string ground_truth;
  std::vector<Choice> choices;
};

struct Dataset {
  std::string name;
  AnswerSpec answer_spec;
  std::vector<TaskSample> train;
  std::vector<TaskSample> validation;
  std::vector<TaskSample> test;

  [[nodiscard]] const std::vector<TaskSample> &split(std::string_view which) const {
    if (which == "train") return train;
    if (which == "validation") return validation;
    if (which == "test") return test;
    throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(which) + "'");
  }
};

/// The user turn sent to the target model for one sample.
inline std::string render_query(const TaskSample &sample) {
  if (sample.choices.empty()) {
    return sample.question;
  }
  std::string out = sample.question + "\nChoices:";
  for (const auto &c : sample.choices) {
    out += " " + c.letter + ". " + c.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Answer extraction and scoring

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string strip_markdown(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '*' && c != '`') {
      out.push_back(c);
    }
  }
  return out;
}

inline std::optional<std::string> normalize_true_false(std::string_view raw) {
  std::string word;
  for (char c : raw) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "YES" || word == "TRUE") return "YES";
  if (word == "NO" || word == "FALSE") return "NO";
  return std::nullopt;
}

inline std::optional<std::string> normalize_numeric(std::string_view raw) {
  std::string cleaned;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == ',' || c == '$') {
      continue;
    }
    // Multi-byte currency signs: euro (E2 82 AC), pound (C2 A3), yen (C2 A5).
    if (c == 0xE2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x82 &&
        static_cast<unsigned char>(raw[i + 2]) == 0xAC) {
      i += 2;
      continue;
    }
    if (c == 0xC2 && i + 1 < raw.size() &&
        (static_cast<unsigned char>(raw[i + 1]) == 0xA3 || static_cast<unsigned char>(raw[i + 1]) == 0xA5)) {
      i += 1;
      continue;
    }
    cleaned.push_back(raw[i]);
  }
  static const std::regex number(R"(-?\d+(\.\d+)?)");
  std::smatch m;
  if (!std::regex_search(cleaned, m, number)) {
    return std::nullopt;
  }
  return m.str();
}

inline std::optional<std::string> normalize_choice(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (!std::isalpha(c)) {
      continue;
    }
    const bool left_ok = i == 0 || !std::isalpha(static_cast<unsigned char>(raw[i - 1]));
    const bool right_ok = i + 1 == raw.size() || !std::isalpha(static_cast<unsigned char>(raw[i + 1]));
    if (left_ok && right_ok) {
      return std::string(1, static_cast<char>(std::toupper(c)));
    }
  }
  return std::nullopt;
}

} // namespace detail

/// Canonical form of an answer string for the given format, or nullopt when
/// nothing usable is present.
inline std::optional<std::string> normalize_answer(std::string_view raw, AnswerFormat format) {
  switch (format) {
  case AnswerFormat::TrueFalse: return detail::normalize_true_false(raw);
  case AnswerFormat::Numeric: return detail::normalize_numeric(raw);
  case AnswerFormat::MultipleChoice: return detail::normalize_choice(raw);
  }
  return std::nullopt;
}

/// Scans lines bottom-up for the answer marker and normalizes what follows it.
/// Total: never throws, returns nullopt (no answer) instead.
inline std::optional<std::string> extract_answer(std::string_view response, const AnswerSpec &spec) noexcept {
  try {
    const std::string marker = detail::lower(spec.marker);
    std::size_t end = response.size();
    while (true) {
      const auto nl = end == 0 ? std::string_view::npos : response.rfind('\n', end - 1);
      const std::size_t begin = nl == std::string_view::npos ? 0 : nl + 1;
      const std::string line = detail::strip_markdown(response.substr(begin, end - begin));
      const auto pos = detail::lower(line).rfind(marker);
      if (pos != std::string::npos) {
        return normalize_answer(std::string_view(line).substr(pos + marker.size()), spec.format);
      }
      if (nl == std::string_view::npos) {
        return std::nullopt;
      }
      end = nl;
    }
  } catch (...) {
    return std::nullopt;
  }
}

inline bool score_sample(const std::optional<std::string> &extracted, std::string_view ground_truth,
                         const AnswerSpec &spec) {
  if (!extracted) {
    return false;
  }
  const auto truth = normalize_answer(ground_truth, spec.format);
  if (!truth) {
    return false;
  }
  if (spec.format != AnswerFormat::Numeric) {
    return *extracted == *truth;
  }
  const double a = std::strtod(extracted->c_str(), nullptr);
  const double b = std::strtod(truth->c_str(), nullptr);
  const bool both_integral = extracted->find('.') == std::string::npos && truth->find('.') == std::string::npos;
  if (both_integral || (a == std::floor(a) && b == std::floor(b))) {
    return a == b;
  }
  return std::abs(a - b) <= 1e-6 * std::max(std::abs(a), std::abs(b));
}

// ---------------------------------------------------------------------------
// Dataset files

inline void validate_sample(const TaskSample &s, const std::string &where) {
  if (trim(s.ground_truth).empty()) {
    throw Error(ErrorKind::Schema, where + ": field \"answer\" is empty");
  }
  if (!s.choices.empty()) {
    const auto truth = trim(s.ground_truth);
    const bool found = std::any_of(s.choices.begin(), s.choices.end(), [&](const Choice &c) {
      return c.letter == truth || normalize_answer(truth, AnswerFormat::MultipleChoice) == c.letter;
    });
    if (!found) {
      throw Error(ErrorKind::Schema, where + ": answer \"" + s.ground_truth + "\" is not one of the choice letters");
    }
  }
}

/// Reads one JSONL split: {"id", "question", "answer", "choices"?} per line.
inline std::vector<TaskSample> load_split(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Parse, "cannot open " + path.string());
  }
  std::vector<TaskSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw Error(ErrorKind::Parse, where + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorKind::Parse, where + ": expected a JSON object");
    }
    auto field = [&](const char *name) -> std::string {
      if (!j.contains(name)) {
        throw Error(ErrorKind::Schema, where + ": missing field \"" + std::string(name) + "\"");
      }
      if (!j[name].is_string()) {
        throw Error(ErrorKind::Schema, where + ": field \"" + std::string(name) + "\" must be a string");
      }
      return j[name].get<std::string>();
    };
    TaskSample s;
    s.id = field("id");
    s.question = field("question");
    s.ground_truth = field("answer");
    if (j.contains("choices")) {
      if (!j["choices"].is_array()) {
        throw Error(ErrorKind::Schema, where + ": field \"choices\" must be an array");
      }
      for (const auto &c : j["choices"]) {
        if (!c.is_object() || !c.contains("letter") || !c.contains("text")) {
          throw Error(ErrorKind::Schema, where + ": choice entries need \"letter\" and \"text\"");
        }
        s.choices.push_back({c["letter"].get<std::string>(), c["text"].get<std::string>()});
      }
    }
    validate_sample(s, where);
    samples.push_back(std::move(s));
  }
  return samples;
}

/// Loads a dataset manifest: {"name", "format", "splits": {"train", "validation",
/// "test"}, "counts"?}. Split paths are relative to the manifest.
inline Dataset load_dataset(const std::filesystem::path &manifest_path, std::optional<AnswerSpec> spec = std::nullopt) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorKind::Parse, "cannot open dataset manifest " + manifest_path.string());
  }
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
  }
  for (const char *key : {"name", "format", "splits"}) {
    if (!m.contains(key)) {
      throw Error(ErrorKind::Schema, manifest_path.string() + ": missing field \"" + std::string(key) + "\"");
    }
  }
  Dataset d;
  d.name = m["name"].get<std::string>();
  if (spec) {
    d.answer_spec = *spec;
  } else {
    const auto fmt = parse_answer_format(m["format"].get<std::string>());
    if (!fmt) {
      throw Error(ErrorKind::Schema, manifest_path.string() + ": unknown format \"" +
                                         m["format"].get<std::string>() + "\"");
    }
    d.answer_spec.format = *fmt;
  }
  const auto base = manifest_path.parent_path();
  const auto &splits = m["splits"];
  auto load = [&](const char *which, std::vector<TaskSample> &into) {
    if (!splits.contains(which)) {
      return;
    }
    into = load_split(base / splits[which].get<std::string>());
    if (m.contains("counts") && m["counts"].contains(which)) {
      const auto expected = m["counts"][which].get<std::size_t>();
      if (expected != into.size()) {
        throw Error(ErrorKind::Schema, std::string(which) + " split has " + std::to_string(into.size()) +
                                           " samples, manifest declares " + std::to_string(expected));
      }
    }
  };
  load("train", d.train);
  load("validation", d.validation);
  load("test", d.test);
  return d;
}

// ---------------------------------------------------------------------------
// Running the target model

struct Response {
  std::string text;
  std::optional<std::string> error;
};

/// One target-model call per sample, prompt as the system turn and the sample
/// as the user turn. Transport failures become error markers in place.
inline std::vector<Response> forward(std::string_view prompt, std::span<const TaskSample> batch, Provider &target,
                                     std::size_t parallelism = 1) {
  if (batch.empty()) {
    throw Error(ErrorKind::EmptyBatch, "forward on an empty batch");
  }
  return parallel_map(batch.size(), parallelism, [&](std::size_t i) {
    const std::vector<Message> messages = {{Role::System, std::string(prompt)}, {Role::User, render_query(batch[i])}};
    try {
      return Response{target.chat_complete(messages, std::nullopt), std::nullopt};
    } catch (const Error &e) {
      if (e.is_fatal()) {
        throw;
      }
      return Response{"", std::string(e.what())};
    }
  });
}

struct SampleRecord {
  std::string id;
  std::string response;
  std::optional<std::string> extracted;
  std::string ground_truth;
  bool correct = false;
  std::optional<std::string> error;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<SampleRecord> records;
};

inline std::vector<SampleRecord> score_responses(std::span<const TaskSample> samples, std::span<const Response> responses,
                                                 const AnswerSpec &spec) {
  std::vector<SampleRecord> records;
  records.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    SampleRecord r;
    r.id = samples[i].id;
    r.ground_truth = samples[i].ground_truth;
    r.response = responses[i].text;
    r.error = responses[i].error;
    if (!r.error) {
      r.extracted = extract_answer(r.response, spec);
      r.correct = score_sample(r.extracted, r.ground_truth, spec);
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline double accuracy_of(std::span<const SampleRecord> records) {
  if (records.empty()) {
    return 0.0;
  }
  const auto correct = std::count_if(records.begin(), records.end(), [](const SampleRecord &r) { return r.correct; });
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

inline EvalResult evaluate(std::string_view prompt, std::span<const TaskSample> samples, Provider &target,
                           const AnswerSpec &spec, std::size_t parallelism = 1) {
  if (samples.empty()) {
    throw Error(ErrorKind::EmptyInput, "evaluate needs at least one sample");
  }
  const auto responses = forward(prompt, samples, target, parallelism);
  EvalResult result;
  result.records = score_responses(samples, responses, spec);
  result.accuracy = accuracy_of(result.records);
  return result;
}

inline json to_json(const SampleRecord &r) {
  return {{"id", r.id},
          {"response", r.response},
          {"extracted", r.extracted ? json(*r.extracted) : json(nullptr)},
          {"ground_truth", r.ground_truth},
          {"correct", r.correct},
          {"error", r.error ? json(*r.error) : json(nullptr)}};
}

inline json to_json(const EvalResult &r) {
  json records = json::array();
  for (const auto &rec : r.records) {
    records.push_back(to_json(rec));
  }
  return {{"accuracy", r.accuracy}, {"records", records}};
}

// ---------------------------------------------------------------------------
// Aggregation

struct DatasetAccuracy {
  std::size_t count = 0; // N_i, test samples
  double accuracy = 0.0; // A_i, percent
};

/// Sum of N_i * A_i over sum of N_i.
inline double weighted_average_accuracy(std::span<const DatasetAccuracy> results) {
  if (results.empty()) {
    throw Error(ErrorKind::EmptyInput, "weighted average of no datasets");
  }
  double weighted = 0.0;
  double total = 0.0;
  for (const auto &r : results) {
    if (r.count < 1) {
      throw Error(ErrorKind::InvalidArgument, "dataset size must be at least 1");
    }
    if (!(r.accuracy >= 0.0 && r.accuracy <= 100.0)) {
      throw Error(ErrorKind::InvalidArgument, "accuracy must be a percentage in [0, 100]");
    }
    weighted += static_cast<double>(r.count) * r.accuracy;
    total += static_cast<double>(r.count);
  }
  return weighted / total;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0; // sample standard deviation; 0 for a single value
};

inline MeanStd mean_and_sample_std(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorKind::EmptyInput, "mean of no values");
  }
  MeanStd out;
  for (double v : values) {
    out.mean += v;
  }
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - out.mean) * (v - out.mean);
    }
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Offline answer key for the mock target

inline std::string wrong_answer(const TaskSample &s, AnswerFormat format) {
  const auto truth = normalize_answer(s.ground_truth, format).value_or(s.ground_truth);
  switch (format) {
  case AnswerFormat::TrueFalse: return truth == "YES" ? "NO" : "YES";
  case AnswerFormat::Numeric: {
    const double v = std::strtod(truth.c_str(), nullptr);
    return std::to_string(static_cast<long long>(std::floor(v)) + 1);
  }
  case AnswerFormat::MultipleChoice: {
    if (!s.choices.empty()) {
      for (std::size_t i = 0; i < s.choices.size(); ++i) {
        if (s.choices[i].letter == truth) {
          return s.choices[(i + 1) % s.choices.size()].letter;
        }
      }
    }
    return truth == "A" ? "B" : "A";
  }
  }
  return "?";
}

inline std::map<std::string, MockAnswer, std::less<>> make_answer_key(const Dataset &d) {
  std::map<std::string, MockAnswer, std::less<>> key;
  for (const auto *split : {&d.train, &d.validation, &d.test}) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      const auto &s = (*split)[i];
      key.insert_or_assign(render_query(s), MockAnswer{trim(s.ground_truth),
                                                       wrong_answer(s, d.answer_spec.format), i});
    }
  }
  return key;
}

} // namespace riot
