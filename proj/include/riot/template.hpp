#pragma once

#include "riot/error.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace riot {

/// Plain-text template with named `{placeholder}` slots. Substitution is a
/// single pass, so braces inside substituted values are never expanded.
class PromptTemplate {
public:
  PromptTemplate() = default;

  PromptTemplate(std::string text, const std::vector<std::string> &required) : text_(std::move(text)) {
    for (const auto &name : required) {
      if (text_.find("{" + name + "}") == std::string::npos) {
        throw Error(ErrorKind::Config, "template is missing required placeholder {" + name + "}");
      }
    }
  }

  static PromptTemplate from_file(const std::filesystem::path &path, const std::vector<std::string> &required) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorKind::Config, "cannot read template " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return PromptTemplate(ss.str(), required);
  }

  [[nodiscard]] const std::string &text() const noexcept { return text_; }

  [[nodiscard]] std::string render(const std::map<std::string, std::string, std::less<>> &values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t i = 0;
    while (i < text_.size()) {
      if (text_[i] == '{') {
        const auto close = text_.find('}', i + 1);
        if (close != std::string::npos) {
          const std::string_view name(text_.data() + i + 1, close - i - 1);
          if (auto it = values.find(name); it != values.end()) {
            out += it->second;
            i = close + 1;
            continue;
          }
        }
      }
      out.push_back(text_[i]);
      ++i;
    }
    return out;
  }

private:
  std::string text_;
};

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return std::string(s.substr(b, e - b));
}

} // namespace riot
