#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riot {

enum class ErrorKind {
  InvalidArgument,
  Config,
  Parse,
  Schema,
  EmptyInput,
  EmptySequence,
  EmptyCandidateSet,
  EmptyBatch,
  EmptyAxis,
  EmptyCompletion,
  IndexedInput,
  DimensionMismatch,
  ZeroNorm,
  AllCandidatesFailed,
  // Provider / transport failures.
  Backend,
  Auth,
  RateLimited,
  Timeout,
  MalformedResponse,
  UnsupportedByBackend,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::InvalidArgument: return "InvalidArgument";
  case ErrorKind::Config: return "ConfigError";
  case ErrorKind::Parse: return "ParseError";
  case ErrorKind::Schema: return "SchemaError";
  case ErrorKind::EmptyInput: return "EmptyInput";
  case ErrorKind::EmptySequence: return "EmptySequence";
  case ErrorKind::EmptyCandidateSet: return "EmptyCandidateSet";
  case ErrorKind::EmptyBatch: return "EmptyBatch";
  case ErrorKind::EmptyAxis: return "EmptyAxis";
  case ErrorKind::EmptyCompletion: return "EmptyCompletion";
  case ErrorKind::IndexedInput: return "IndexedInputError";
  case ErrorKind::DimensionMismatch: return "DimensionMismatch";
  case ErrorKind::ZeroNorm: return "ZeroNorm";
  case ErrorKind::AllCandidatesFailed: return "AllCandidatesFailed";
  case ErrorKind::Backend: return "BackendError";
  case ErrorKind::Auth: return "AuthError";
  case ErrorKind::RateLimited: return "RateLimited";
  case ErrorKind::Timeout: return "Timeout";
  case ErrorKind::MalformedResponse: return "MalformedResponse";
  case ErrorKind::UnsupportedByBackend: return "UnsupportedByBackend";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  /// Transport-level failure raised by a model provider.
  [[nodiscard]] bool is_backend() const noexcept {
    switch (kind_) {
    case ErrorKind::Backend:
    case ErrorKind::Auth:
    case ErrorKind::RateLimited:
    case ErrorKind::Timeout:
    case ErrorKind::MalformedResponse:
    case ErrorKind::UnsupportedByBackend:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::EmptyCompletion:
      return true;
    default:
      return false;
    }
  }

  /// Failures that retrying or skipping cannot fix; a run aborts on these.
  [[nodiscard]] bool is_fatal() const noexcept {
    return kind_ == ErrorKind::Auth || kind_ == ErrorKind::UnsupportedByBackend ||
           kind_ == ErrorKind::Config;
  }

private:
  ErrorKind kind_;
};

} // namespace riot
