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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "zeshot/backend.hpp"
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

// Published FNV-1a 64 test vectors, plus values computed with an
// independent Python implementation.
TEST(Fnv1aTest, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("yes"), 0xb53f7a197981b790ULL);
  EXPECT_EQ(fnv1a64("flooded"), 0xe76b7d1adb1daebaULL);
}

TEST(MockEmbedTest, YesYesIsOneBucketOfTwo) {
  const auto v = mock_embed("yes yes");
  ASSERT_EQ(v.dim(), 64u);
  const std::size_t bucket = 0xb53f7a197981b790ULL % 64;  // 16
  ASSERT_EQ(bucket, 16u);
  for (std::size_t i = 0; i < v.dim(); ++i) EXPECT_EQ(v[i], i == bucket ? 2.0 : 0.0) << i;
}

TEST(MockEmbedTest, OrderFreeBag) {
  EXPECT_EQ(mock_embed("flooded road"), mock_embed("road flooded"));
  EXPECT_EQ(cosine_similarity(mock_embed("flooded road"), mock_embed("road flooded")), 1.0);
}

TEST(MockEmbedTest, TokenEdgesAndCase) {
  EXPECT_EQ(mock_tokens("Is the road FLOODED? yes, no"),
            (std::vector<std::string>{"is", "the", "road", "flooded", "yes", "no"}));
  EXPECT_EQ(mock_tokens("(non-flooded) ... 'x'"), (std::vector<std::string>{"non-flooded", "x"}));
  EXPECT_EQ(mock_embed("Yes!"), mock_embed("yes"));
}

TEST(MockEmbedTest, Deterministic) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto s = testing::random_phrase(rng, 1, 10);
    EXPECT_EQ(mock_embed(s), mock_embed(std::string(s)));
  }
}

TEST(MockEmbedTest, RejectsTokenlessText) {
  EXPECT_EQ(error_code_of([] { mock_embed(""); }), Errc::precondition);
  EXPECT_EQ(error_code_of([] { mock_embed(" ?! "); }), Errc::precondition);
}

TEST(EmbeddingVectorTest, Invariants) {
  EXPECT_EQ(error_code_of([] { EmbeddingVector(std::vector<double>{}); }), Errc::validation);
  EXPECT_EQ(error_code_of([] { EmbeddingVector({1.0, std::numeric_limits<double>::quiet_NaN()}); }),
            Errc::validation);
  EXPECT_EQ(error_code_of([] { EmbeddingVector({std::numeric_limits<double>::infinity()}); }), Errc::validation);
  EXPECT_EQ(EmbeddingVector({1.0, 2.0}).dim(), 2u);
}

TEST(EmbedTextsTest, Contract) {
  const MockEmbedder mock;
  const std::vector<std::string> same{"a", "a"};
  const auto v = embed_texts(mock, same);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], v[1]);

  EXPECT_EQ(error_code_of([&] { embed_texts(mock, std::vector<std::string>{}); }), Errc::precondition);
  EXPECT_EQ(error_code_of([&] { embed_texts(mock, std::vector<std::string>{"a", "  "}); }), Errc::precondition);

  // A backend that drops one vector.
  testing::FunctionEmbedder base([](const std::string& t) { return std::vector<double>{1.0, double(t.size())}; });
  struct Short : Embedder {
    const Embedder& inner;
    explicit Short(const Embedder& e) : inner(e) {}
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
      auto v = inner.embed(texts);
      v.pop_back();
      return v;
    }
  } short_backend(base);
  EXPECT_EQ(error_code_of([&] { embed_texts(short_backend, std::vector<std::string>{"a", "b", "c"}); }),
            Errc::count_mismatch);

  testing::FunctionEmbedder ragged([](const std::string& t) { return std::vector<double>(t.size(), 1.0); });
  EXPECT_EQ(error_code_of([&] { embed_texts(ragged, std::vector<std::string>{"a", "bb"}); }),
            Errc::dimension_mismatch);
}

TEST(MockGeneratorTest, ScriptDefaultAndMissing) {
  MockGenerator gen;
  gen.set("img1", "Q? yes, no", "yes");
  const auto img1 = ImageRef::from_path("img1");
  EXPECT_EQ(gen.generate(img1, "Q? yes, no").text, "yes");
  EXPECT_EQ(error_code_of([&] { gen.generate(img1, "Other?"); }), Errc::missing_key);
  gen.set_default("unknown");
  EXPECT_EQ(gen.generate(img1, "Other?").text, "unknown");
  // Wildcard image.
  gen.set("*", "W?", "w");
  EXPECT_EQ(gen.generate(ImageRef::from_path("zzz"), "W?").text, "w");
}

TEST(MockGeneratorTest, EmptyScriptedAnswerIsAnError) {
  MockGenerator gen;
  gen.set("img", "Q?", "   ");
  EXPECT_EQ(error_code_of([&] { gen.generate(ImageRef::from_path("img"), "Q?"); }), Errc::empty_answer);
}

TEST(MockGeneratorTest, JsonRoundTrip) {
  MockGenerator gen(std::string("unknown"));
  gen.set("a.png", "Q1?", "x");
  gen.set("*", "Q2?", "y");
  const auto again = MockGenerator::from_json(gen.to_json());
  EXPECT_EQ(again.to_json(), gen.to_json());
  EXPECT_EQ(again.generate(ImageRef::from_path("b.png"), "Q2?").text, "y");
}

TEST(ImageRefTest, LocatorForms) {
  EXPECT_EQ(ImageRef::from_locator("http://host/a.jpg").kind(), "url");
  EXPECT_EQ(ImageRef::from_locator("https://host/a.jpg").id, "https://host/a.jpg");
  const auto p = ImageRef::from_locator("images/a.jpg", "/data");
  EXPECT_EQ(p.kind(), "path");
  EXPECT_EQ(p.id, "images/a.jpg");
  EXPECT_EQ(std::get<ImageRef::Path>(p.locator).path, std::filesystem::path("/data/images/a.jpg"));
  const auto b = ImageRef::from_bytes("abc", "image/png");
  EXPECT_EQ(b.kind(), "inline");
  EXPECT_EQ(b.id, "fnv1a64:" + hex64(fnv1a64("abc")));
}

TEST(BackendEndpointTest, Validation) {
  BackendEndpoint e{"http://localhost:1", BackendKind::embedder, 0, std::nullopt};
  EXPECT_EQ(error_code_of([&] { e.validate(); }), Errc::validation);
  e.timeout_ms = 30000;
  EXPECT_NO_THROW(e.validate());
}

}  // namespace
}  // namespace zeshot
