#pragma once

#include "riot/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace riot {

/// Dense sentence embedding. Never empty, never all-zero.
class EmbeddingVector {
public:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
      throw Error(ErrorKind::ZeroNorm, "embedding vector has no components");
    }
    bool any_nonzero = false;
    for (double v : values_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::InvalidArgument, "embedding vector has a non-finite component");
      }
      any_nonzero = any_nonzero || v != 0.0;
    }
    if (!any_nonzero) {
      throw Error(ErrorKind::ZeroNorm, "embedding vector is all zeros");
    }
  }

  [[nodiscard]] std::size_t dimension() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

  [[nodiscard]] double norm() const noexcept {
    double sum = 0.0;
    for (double v : values_) {
      sum += v * v;
    }
    return std::sqrt(sum);
  }

  friend bool operator==(const EmbeddingVector &, const EmbeddingVector &) = default;

private:
  std::vector<double> values_;
};

} // namespace riot
