#pragma once

#include "riot/embedding.hpp"
#include "riot/error.hpp"
#include "riot/providers.hpp"
#include "riot/segmentation.hpp"

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace riot {

/// Row-major n x m matrix of cosine similarities (rows: parent sentences,
/// columns: child sentences).
class SimilarityMatrix {
public:
  SimilarityMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline double dot(const EmbeddingVector &a, const EmbeddingVector &b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.dimension(); ++k) {
    sum += a[k] * b[k];
  }
  return sum;
}

inline SimilarityMatrix cosine_matrix(std::span<const EmbeddingVector> parent, std::span<const EmbeddingVector> child) {
  SimilarityMatrix sim(parent.size(), child.size());
  if (parent.empty() || child.empty()) {
    return sim;
  }
  const std::size_t d = parent.front().dimension();
  auto check = [d](const EmbeddingVector &v) {
    if (v.dimension() != d) {
      throw Error(ErrorKind::DimensionMismatch,
                  "expected dimension " + std::to_string(d) + ", got " + std::to_string(v.dimension()));
    }
  };
  std::vector<double> parent_norms;
  std::vector<double> child_norms;
  for (const auto &v : parent) {
    check(v);
    parent_norms.push_back(v.norm());
  }
  for (const auto &v : child) {
    check(v);
    child_norms.push_back(v.norm());
  }
  for (std::size_t i = 0; i < parent.size(); ++i) {
    for (std::size_t j = 0; j < child.size(); ++j) {
      // Identical vectors must score exactly 1 so duplicate sentences hit the
      // threshold boundaries deterministically.
      if (parent[i] == child[j]) {
        sim(i, j) = 1.0;
        continue;
      }
      const double c = dot(parent[i], child[j]) / (parent_norms[i] * child_norms[j]);
      sim(i, j) = std::clamp(c, -1.0, 1.0);
    }
  }
  return sim;
}

inline double row_max(const SimilarityMatrix &sim, std::size_t row) {
  if (sim.cols() == 0) {
    throw Error(ErrorKind::EmptyAxis, "row_max on a matrix with no columns");
  }
  if (row >= sim.rows()) {
    throw Error(ErrorKind::InvalidArgument, "row index out of range");
  }
  const auto r = sim.row(row);
  return *std::max_element(r.begin(), r.end());
}

inline double col_max(const SimilarityMatrix &sim, std::size_t col) {
  if (sim.rows() == 0) {
    throw Error(ErrorKind::EmptyAxis, "col_max on a matrix with no rows");
  }
  if (col >= sim.cols()) {
    throw Error(ErrorKind::InvalidArgument, "column index out of range");
  }
  double best = sim(0, col);
  for (std::size_t i = 1; i < sim.rows(); ++i) {
    best = std::max(best, sim(i, col));
  }
  return best;
}

/// Per-run memo of sentence embeddings keyed by sentence text.
class EmbeddingCache {
public:
  [[nodiscard]] const EmbeddingVector *find(const std::string &text) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(text);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void insert(const std::string &text, const EmbeddingVector &vec) {
    std::lock_guard lock(mutex_);
    entries_.try_emplace(text, vec);
  }

private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> entries_;
};

inline std::vector<EmbeddingVector> embed_batch(std::span<const Sentence> sentences, Provider &backend,
                                                EmbeddingCache *cache = nullptr) {
  std::vector<std::optional<EmbeddingVector>> slots(sentences.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (cache != nullptr) {
      if (const auto *hit = cache->find(sentences[i].text)) {
        slots[i] = *hit;
        continue;
      }
    }
    missing.push_back(sentences[i].text);
    missing_at.push_back(i);
  }

  if (!missing.empty()) {
    auto vectors = backend.embed(missing);
    if (vectors.size() != missing.size()) {
      throw Error(ErrorKind::DimensionMismatch, "backend returned " + std::to_string(vectors.size()) +
                                                    " vectors for " + std::to_string(missing.size()) + " inputs");
    }
    for (std::size_t k = 0; k < vectors.size(); ++k) {
      if (cache != nullptr) {
        cache->insert(missing[k], vectors[k]);
      }
      slots[missing_at[k]] = std::move(vectors[k]);
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto &s : slots) {
    if (!out.empty() && s->dimension() != out.front().dimension()) {
      throw Error(ErrorKind::DimensionMismatch, "backend returned vectors of inconsistent dimension");
    }
    out.push_back(std::move(*s));
  }
  return out;
}

} // namespace riot
