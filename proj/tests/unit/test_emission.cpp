#include <gtest/gtest.h>

#include <cmath>

#include "fewshot/emission.hpp"
#include "fewshot/errors.hpp"
#include "oracles.hpp"

namespace fewshot {
namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (auto r : rows) {
    std::size_t j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

// One support sentence, one pairing: the query vectors are shared.
PairEmbedding single_pair(Matrix query, Matrix support) {
  return PairEmbedding{{std::move(query)}, {std::move(support)}};
}

// Tag layout for one label: 0 = O, 1 = B-l1, 2 = I-l1.
constexpr std::size_t kTags = 3;

TEST(Matching, HandDotProducts) {
  auto emb = single_pair(rows_of({{1, 1}}), rows_of({{1, 0}, {0, 1}}));
  SupportTagIndices tags{{0, 1}};
  auto e = matching_score(emb, tags, kTags);
  EXPECT_EQ(e(0, 0), 1.0);
  EXPECT_EQ(e(0, 1), 1.0);
  EXPECT_EQ(e(0, 2), kNegInfScore);
}

TEST(Matching, SumsOverSameTagTokens) {
  auto emb = single_pair(rows_of({{1, 0}}), rows_of({{1, 0}, {1, 0}}));
  SupportTagIndices tags{{1, 1}};
  EXPECT_EQ(matching_score(emb, tags, kTags)(0, 1), 2.0);
  EXPECT_EQ(normalized_matching_score(emb, tags, kTags)(0, 1), 1.0);
}

TEST(Matching, OrthogonalQueryScoresZero) {
  auto emb = single_pair(rows_of({{0, 0, 1}}), rows_of({{1, 0, 0}, {0, 2, 0}, {3, 1, 0}}));
  SupportTagIndices tags{{0, 1, 2}};
  for (auto kind : {ScorerKind::Matching, ScorerKind::NormalizedMatching, ScorerKind::Prototypical,
                    ScorerKind::NearestToken}) {
    auto e = emission_scores(kind, emb, tags, kTags);
    for (std::size_t t = 0; t < kTags; ++t) EXPECT_EQ(e(0, t), 0.0) << to_string(kind);
  }
}

TEST(NormalizedMatching, OneTokenPerTagEqualsMatching) {
  Rng rng(2);
  auto emb = single_pair(testing::random_matrix(rng, 4, 5, -1, 1), testing::random_matrix(rng, 3, 5, -1, 1));
  SupportTagIndices tags{{2, 0, 1}};
  EXPECT_EQ(normalized_matching_score(emb, tags, kTags), matching_score(emb, tags, kTags));
}

TEST(NormalizedMatching, MissingTagGetsSentinel) {
  auto emb = single_pair(rows_of({{1, 2}}), rows_of({{1, 0}}));
  auto e = normalized_matching_score(emb, {{0}}, kTags);
  EXPECT_EQ(e(0, 1), kNegInfScore);
  EXPECT_EQ(e(0, 2), kNegInfScore);
  EXPECT_FALSE(std::isnan(e(0, 1)));
}

TEST(NormalizedMatching, IsMatchingDividedByCounts) {
  Rng rng(3);
  PairEmbedding emb;
  SupportTagIndices tags{{0, 1, 2, 0}, {1, 1, 0}};
  for (const auto& s : tags) {
    emb.query_vectors.push_back(testing::random_matrix(rng, 5, 4, -1, 1));
    emb.support_vectors.push_back(testing::random_matrix(rng, s.size(), 4, -1, 1));
  }
  const double counts[kTags] = {3, 3, 1};
  auto mn = matching_score(emb, tags, kTags);
  auto nmn = normalized_matching_score(emb, tags, kTags);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t t = 0; t < kTags; ++t) EXPECT_NEAR(nmn(j, t), mn(j, t) / counts[t], 1e-14);
  }
}

TEST(Matching, UsesThePairingOfEachSupportSentence) {
  // Query token is [1,0] when paired with sentence 0 and [0,1] with sentence 1.
  PairEmbedding emb{{rows_of({{1, 0}}), rows_of({{0, 1}})}, {rows_of({{2, 5}}), rows_of({{7, 3}})}};
  SupportTagIndices tags{{1}, {1}};
  EXPECT_EQ(matching_score(emb, tags, kTags)(0, 1), 2.0 + 3.0);
  EXPECT_EQ(nearest_token_score(emb, tags, kTags)(0, 1), 3.0);
  // Prototype [4.5, 4] against the mean query vector [0.5, 0.5].
  EXPECT_DOUBLE_EQ(prototypical_score(emb, tags, kTags)(0, 1), 4.25);
}

TEST(Prototypical, MeanOfSupportVectors) {
  auto emb = single_pair(rows_of({{2, 2}}), rows_of({{1, 0}, {0, 1}}));
  EXPECT_DOUBLE_EQ(prototypical_score(emb, {{1, 1}}, kTags)(0, 1), 2.0);
}

TEST(Prototypical, QueryAtPrototypeGivesSquaredNorm) {
  auto emb = single_pair(rows_of({{0.5, 1.5}}), rows_of({{1, 1}, {0, 2}}));
  EXPECT_DOUBLE_EQ(prototypical_score(emb, {{2, 2}}, kTags)(0, 2), 0.25 + 2.25);
}

TEST(NearestToken, MaxOverSameTagTokens) {
  auto emb = single_pair(rows_of({{3, 1}}), rows_of({{1, 0}, {0, 1}}));
  auto e = nearest_token_score(emb, {{1, 1}}, kTags);
  EXPECT_EQ(e(0, 1), 3.0);
  EXPECT_EQ(e(0, 0), kNegInfScore);
}

TEST(Scorers, AgreeWithOneTokenPerTagAndSharedQuery) {
  Rng rng(8);
  Matrix query = testing::random_matrix(rng, 3, 4, -1, 1);
  // Three single-token support sentences, one per tag, all sharing the query vectors.
  PairEmbedding emb;
  SupportTagIndices tags{{0}, {1}, {2}};
  for (std::size_t s = 0; s < 3; ++s) {
    emb.query_vectors.push_back(query);
    emb.support_vectors.push_back(testing::random_matrix(rng, 1, 4, -1, 1));
  }
  auto mn = matching_score(emb, tags, kTags);
  for (auto kind : {ScorerKind::NormalizedMatching, ScorerKind::Prototypical, ScorerKind::NearestToken}) {
    auto e = emission_scores(kind, emb, tags, kTags);
    for (std::size_t i = 0; i < mn.values().size(); ++i) {
      EXPECT_NEAR(e.values()[i], mn.values()[i], 1e-14) << to_string(kind);
    }
  }
}

TEST(Scorers, ScalingEmbeddingsScalesScoresQuadratically) {
  Rng rng(9);
  PairEmbedding emb;
  SupportTagIndices tags{{0, 1, 2}, {0, 0, 1}};
  for (const auto& s : tags) {
    emb.query_vectors.push_back(testing::random_matrix(rng, 4, 3, -1, 1));
    emb.support_vectors.push_back(testing::random_matrix(rng, s.size(), 3, -1, 1));
  }
  PairEmbedding scaled = emb;
  for (auto* group : {&scaled.query_vectors, &scaled.support_vectors}) {
    for (auto& m : *group) {
      for (auto& x : m.values()) x *= 3.0;
    }
  }
  for (auto kind : {ScorerKind::Matching, ScorerKind::NormalizedMatching, ScorerKind::Prototypical}) {
    auto a = emission_scores(kind, emb, tags, kTags);
    auto b = emission_scores(kind, scaled, tags, kTags);
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      EXPECT_NEAR(b.values()[i], 9.0 * a.values()[i], 1e-12) << to_string(kind);
    }
  }
}

TEST(Scorers, ProjectionGradientMatchesFiniteDifferences) {
  Rng rng(10);
  const std::size_t h = 3;
  PairEmbedding raw;
  SupportTagIndices tags{{0, 1, 2, 1}, {2, 0}};
  for (const auto& s : tags) {
    raw.query_vectors.push_back(testing::random_matrix(rng, 3, h, -1, 1));
    raw.support_vectors.push_back(testing::random_matrix(rng, s.size(), h, -1, 1));
  }
  Matrix p = testing::random_matrix(rng, h, h, -1, 1);
  Matrix weights = testing::random_matrix(rng, 3, kTags, -1, 1);
  for (auto kind : {ScorerKind::Matching, ScorerKind::NormalizedMatching, ScorerKind::Prototypical,
                    ScorerKind::NearestToken}) {
    auto objective = [&](const Matrix& proj) {
      auto e = emission_scores(kind, project(raw, proj), tags, kTags);
      double total = 0.0;
      for (std::size_t i = 0; i < e.values().size(); ++i) total += weights.values()[i] * e.values()[i];
      return total;
    };
    auto grad = emission_projection_gradient(kind, raw, tags, kTags, p, weights);
    for (std::size_t i = 0; i < p.values().size(); ++i) {
      Matrix plus = p, minus = p;
      plus.values()[i] += 1e-6;
      minus.values()[i] -= 1e-6;
      const double fd = (objective(plus) - objective(minus)) / 2e-6;
      EXPECT_LT(testing::relative_error(grad.values()[i], fd), 1e-6) << to_string(kind);
    }
  }
}

TEST(Scorers, ParseNames) {
  EXPECT_EQ(parse_scorer("mn"), ScorerKind::Matching);
  EXPECT_EQ(parse_scorer("nmn"), ScorerKind::NormalizedMatching);
  EXPECT_EQ(parse_scorer("proto"), ScorerKind::Prototypical);
  EXPECT_EQ(parse_scorer("nearest_token"), ScorerKind::NearestToken);
  EXPECT_EQ(parse_scorer(to_string(ScorerKind::Prototypical)), ScorerKind::Prototypical);
  EXPECT_THROW(parse_scorer("cosine"), ConfigError);
}

TEST(Scorers, SupportTagIndicesFollowLabelSet) {
  LabelSet ls({Label("a"), Label("b")});
  SupportSet support{{LabeledSequence({"x", "y", "z"}, {Tag::begin(Label("b")), Tag::inside(Label("b")),
                                                         Tag::outside()})},
                     1};
  EXPECT_EQ(support_tag_indices(support, ls), (SupportTagIndices{{3, 4, 0}}));
}

}  // namespace
}  // namespace fewshot
