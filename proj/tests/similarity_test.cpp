#include "riot/mock_provider.hpp"
#include "riot/similarity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace {

riot::EmbeddingVector v(std::vector<double> x) { return riot::EmbeddingVector(std::move(x)); }

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

double brute_cosine(const std::vector<double> &a, const std::vector<double> &b) {
  double d = 0;
  double na = 0;
  double nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return d / std::sqrt(na * nb);
}

} // namespace

TEST(Embedding, RejectsEmptyZeroAndNonFinite) {
  EXPECT_THROW(v({}), riot::Error);
  try {
    v({0.0, 0.0});
    FAIL();
  } catch (const riot::Error &e) {
    EXPECT_EQ(e.kind(), riot::ErrorKind::ZeroNorm);
  }
  EXPECT_THROW(v({1.0, NAN}), riot::Error);
}

TEST(Cosine, IdenticalUnitVectorsGiveOne) {
  const std::vector<riot::EmbeddingVector> p{v({1, 0, 0})};
  const auto m = riot::cosine_matrix(p, p);
  EXPECT_EQ(m(0, 0), 1.0);
}

TEST(Cosine, OrthogonalVectorsGiveZero) {
  const std::vector<riot::EmbeddingVector> p{v({1, 0})};
  const std::vector<riot::EmbeddingVector> c{v({0, 1})};
  EXPECT_EQ(riot::cosine_matrix(p, c)(0, 0), 0.0);
}

TEST(Cosine, HandComputedValue) {
  // dot 8, both norms 3.
  const std::vector<riot::EmbeddingVector> p{v({1, 2, 2})};
  const std::vector<riot::EmbeddingVector> c{v({2, 1, 2})};
  EXPECT_NEAR(riot::cosine_matrix(p, c)(0, 0), 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(riot::cosine_matrix(p, c)(0, 0), brute_cosine({1, 2, 2}, {2, 1, 2}), 1e-12);
}

TEST(Cosine, DimensionMismatchThrows) {
  const std::vector<riot::EmbeddingVector> p{v({1, 0})};
  const std::vector<riot::EmbeddingVector> c{v({1, 0, 0})};
  try {
    (void)riot::cosine_matrix(p, c);
    FAIL();
  } catch (const riot::Error &e) {
    EXPECT_EQ(e.kind(), riot::ErrorKind::DimensionMismatch);
  }
}

TEST(Cosine, RandomMatricesAreSymmetricBoundedAndScaleInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    std::vector<riot::EmbeddingVector> a;
    std::vector<riot::EmbeddingVector> scaled;
    for (int i = 0; i < 4; ++i) {
      std::vector<double> x(8);
      for (auto &e : x) e = g(rng);
      a.emplace_back(x);
      for (auto &e : x) e *= 3.5;
      scaled.emplace_back(x);
    }
    const auto m = riot::cosine_matrix(a, a);
    const auto ms = riot::cosine_matrix(a, scaled);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(m(i, j), m(j, i));
        EXPECT_LE(std::abs(m(i, j)), 1.0);
        EXPECT_NEAR(m(i, j), ms(i, j), 1e-12);
        EXPECT_NEAR(m(i, j), brute_cosine(vec(a[i].values()), vec(a[j].values())), 1e-12);
      }
    }
  }
}

TEST(Cosine, RowAndColumnMaxima) {
  riot::SimilarityMatrix row(1, 2);
  row(0, 0) = 0.1;
  row(0, 1) = 0.9;
  EXPECT_EQ(riot::row_max(row, 0), 0.9);
  riot::SimilarityMatrix col(2, 1);
  col(0, 0) = 0.1;
  col(1, 0) = 0.9;
  EXPECT_EQ(riot::col_max(col, 0), 0.9);
  riot::SimilarityMatrix one(1, 1);
  one(0, 0) = 0.5;
  EXPECT_EQ(riot::row_max(one, 0), 0.5);
  EXPECT_EQ(riot::col_max(one, 0), 0.5);
}

TEST(Cosine, MaximaMatchLinearScanOnRandomMatrices) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto [r, c] : {std::pair{3, 4}, std::pair{4, 3}, std::pair{7, 2}}) {
    riot::SimilarityMatrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    for (int i = 0; i < r; ++i) {
      double best = -2;
      for (int j = 0; j < c; ++j) best = std::max(best, m(i, j));
      EXPECT_EQ(riot::row_max(m, i), best);
    }
    for (int j = 0; j < c; ++j) {
      double best = -2;
      for (int i = 0; i < r; ++i) best = std::max(best, m(i, j));
      EXPECT_EQ(riot::col_max(m, j), best);
    }
  }
}

TEST(Cosine, EmptyAxisThrows) {
  riot::SimilarityMatrix m(2, 0);
  try {
    (void)riot::row_max(m, 0);
    FAIL();
  } catch (const riot::Error &e) {
    EXPECT_EQ(e.kind(), riot::ErrorKind::EmptyAxis);
  }
}

TEST(EmbedBatch, DictionaryMockLookup) {
  riot::MockProvider mock(0);
  mock.set_embedding_overrides({{"a", {1, 0}}, {"b", {0, 1}}});
  const std::vector<riot::Sentence> s{{"a", 0}, {"b", 1}};
  const auto out = riot::embed_batch(s, mock);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(vec(out[0].values()), (std::vector<double>{1, 0}));
  EXPECT_EQ(vec(out[1].values()), (std::vector<double>{0, 1}));
}

TEST(EmbedBatch, EmptyInputNeedsNoBackend) {
  riot::MockProvider mock(0);
  EXPECT_TRUE(riot::embed_batch(std::vector<riot::Sentence>{}, mock).empty());
}

TEST(EmbedBatch, CacheAvoidsRepeatCalls) {
  riot::MockProvider mock(0);
  auto log = std::make_shared<riot::TranscriptLog>();
  mock.set_transcript(log);
  riot::EmbeddingCache cache;
  const std::vector<riot::Sentence> s{{"One sentence.", 0}, {"Two sentence.", 1}};
  const auto first = riot::embed_batch(s, mock, &cache);
  const auto second = riot::embed_batch(s, mock, &cache);
  EXPECT_EQ(log->size(), 1u);
  EXPECT_EQ(first[0], second[0]);
}

TEST(MockEmbedding, HashVectorsAreUnitAndStable) {
  riot::MockProvider a(3);
  riot::MockProvider b(3);
  const auto x = a.embed_one("Think step by step.");
  EXPECT_EQ(x, b.embed_one("Think step by step."));
  EXPECT_NEAR(x.norm(), 1.0, 1e-12);
  EXPECT_NE(x, a.embed_one("Answer with a number."));
}
