// Copyright 2026 The ZeShot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "zeshot/matcher.hpp"

namespace zeshot {
namespace {

template <typename Fn>
Errc error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::io;
}

TEST(QuerySetTest, ConcatenatesWithSingleSpace) {
  const std::vector<std::string> yes_no{"yes", "no"};
  const auto set = build_query_set("Is the road flooded?", yes_no);
  EXPECT_EQ(set.texts(), (std::vector<std::string>{"Is the road flooded? yes", "Is the road flooded? no"}));
  EXPECT_EQ(set.candidate_queries[1].candidate, "no");

  EXPECT_EQ(build_query_set("Q", std::vector<std::string>{"a"}).texts(), std::vector<std::string>{"Q a"});
  EXPECT_EQ(error_code_of([] { build_query_set("Q", std::vector<std::string>{}); }), Errc::precondition);
}

TEST(ReferenceQueryTest, TrimsRawAnswer) {
  EXPECT_EQ(build_reference_query("Is the road flooded?", "no"), "Is the road flooded? no");
  EXPECT_EQ(build_reference_query("Q", "  flooded "), "Q flooded");
  EXPECT_EQ(error_code_of([] { build_reference_query("Q", "   "); }), Errc::empty_answer);
}

TEST(CosineTest, HandValues) {
  EXPECT_EQ(cosine_similarity(EmbeddingVector({3.0, -1.0, 2.0}), EmbeddingVector({3.0, -1.0, 2.0})), 1.0);
  EXPECT_EQ(cosine_similarity(EmbeddingVector({1.0, 0.0}), EmbeddingVector({0.0, 1.0})), 0.0);
  // dot = 8, both norms 3.
  EXPECT_NEAR(cosine_similarity(EmbeddingVector({1, 2, 2}), EmbeddingVector({2, 1, 2})), 8.0 / 9.0, 1e-15);
  EXPECT_EQ(cosine_similarity(EmbeddingVector({1.0, 2.0}), EmbeddingVector({-2.0, -4.0})), -1.0);
}

TEST(CosineTest, Errors) {
  EXPECT_EQ(error_code_of([] { cosine_similarity(EmbeddingVector({1, 2}), EmbeddingVector({1, 2, 3})); }),
            Errc::dimension_mismatch);
  EXPECT_EQ(error_code_of([] { cosine_similarity(EmbeddingVector({0, 0}), EmbeddingVector({1, 2})); }),
            Errc::zero_norm);
}

TEST(CosineTest, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-10, 10);
  for (int t = 0; t < 500; ++t) {
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    std::vector<double> a(dim), b(dim);
    for (auto& x : a) x = val(rng);
    for (auto& x : b) x = val(rng);
    const double ab = cosine_similarity(a, b);
    const double ba = cosine_similarity(b, a);
    EXPECT_LT(std::abs(ab - ba), 1e-12);
    EXPECT_LE(ab, 1.0);
    EXPECT_GE(ab, -1.0);
  }
}

// Identical vectors score exactly 1.0 for arbitrary magnitudes.
TEST(CosineTest, SelfSimilarityIsExactlyOne) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> val(-1e3, 1e3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(std::uniform_int_distribution<std::size_t>(1, 128)(rng));
    for (auto& x : a) x = val(rng);
    ASSERT_EQ(cosine_similarity(a, a), 1.0);
  }
  EXPECT_EQ(cosine_similarity(std::vector<double>{1e-200, 1e-200}, std::vector<double>{1e-200, 1e-200}), 1.0);
  EXPECT_EQ(cosine_similarity(std::vector<double>{1e200, 1e200}, std::vector<double>{1e200, 1e200}), 1.0);
}

TEST(SelectBestTest, LowestIndexOnTies) {
  EXPECT_EQ(select_best(std::vector<double>{0.5, 0.9, 0.9}), 1u);
  EXPECT_EQ(select_best(std::vector<double>{0.3, 0.3, 0.3}), 0u);
  EXPECT_EQ(select_best(std::vector<double>{-1.0}), 0u);
}

TEST(MatchAnswerTest, MockEmbedderSelfMatch) {
  const MockEmbedder mock;
  const std::vector<std::string> yes_no{"yes", "no"};
  const auto m = match_answer(mock, "Is the road flooded?", yes_no, "no");
  EXPECT_EQ(m.selected, "no");
  EXPECT_EQ(m.selected_index, 1u);
  EXPECT_EQ(m.scores[1], 1.0);
  EXPECT_LT(m.scores[0], 1.0);
  EXPECT_EQ(m.reference_query, "Is the road flooded? no");
}

TEST(MatchAnswerTest, OutOfSetAnswerStillMapsInSet) {
  const MockEmbedder mock;
  const std::vector<std::string> density{"low", "moderate", "high"};
  const auto m = match_answer(mock, "How dense is the area?", density, "scarce");
  EXPECT_NE(std::find(density.begin(), density.end(), m.selected), density.end());
  EXPECT_EQ(m.scores.size(), 3u);
}

TEST(MatchAnswerTest, EqualScoresPickIndexZero) {
  const auto flat = testing::constant_embedder({1.0, 2.0, 3.0});
  const std::vector<std::string> c{"b", "a", "c"};
  const auto m = match_answer(*flat, "Q?", c, "zzz");
  EXPECT_EQ(m.selected_index, 0u);
  EXPECT_EQ(m.scores, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(MatchAnswerTest, OneBatchReferenceFirst) {
  auto counting = std::make_shared<testing::CountingEmbedder>(std::make_shared<MockEmbedder>());
  std::vector<std::string> seen;
  testing::FunctionEmbedder recorder([&](const std::string& t) {
    seen.push_back(t);
    auto v = mock_embed(t);
    return std::vector<double>(v.values().begin(), v.values().end());
  });
  const std::vector<std::string> c{"low", "moderate", "high"};
  match_answer(recorder, "How dense is the area?", c, " scarce ");
  EXPECT_EQ(seen, (std::vector<std::string>{"How dense is the area? scarce", "How dense is the area? low",
                                            "How dense is the area? moderate", "How dense is the area? high"}));
  match_answer(*counting, "How dense is the area?", c, "low");
  EXPECT_EQ(counting->calls(), 1u);
  EXPECT_EQ(counting->texts(), 4u);
}

TEST(MatchAnswerTest, ZeroNormEmbeddingSurfaces) {
  const auto zeros = testing::table_embedder({{"Q? a", {0.0, 0.0}}, {"Q? x", {1.0, 0.0}}, {"Q? b", {0.0, 1.0}}});
  const std::vector<std::string> c{"a", "b"};
  EXPECT_EQ(error_code_of([&] { match_answer(*zeros, "Q?", c, "x"); }), Errc::zero_norm);
}

TEST(MatchAnswerTest, PermutingCandidatesPermutesScores) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto embedder = testing::random_embedder(rng(), 16);
    std::vector<std::string> c;
    const int m = std::uniform_int_distribution<int>(2, 8)(rng);
    for (int i = 0; i < m; ++i) c.push_back(testing::random_word(rng) + std::to_string(i));
    const auto base = match_answer(*embedder, "Q?", c, "raw answer");

    std::vector<std::size_t> perm(c.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> pc;
    for (auto i : perm) pc.push_back(c[i]);
    const auto permuted = match_answer(*embedder, "Q?", pc, "raw answer");
    for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(permuted.scores[k], base.scores[perm[k]]);
    EXPECT_EQ(permuted.selected, base.selected);
  }
}

}  // namespace
}  // namespace zeshot
