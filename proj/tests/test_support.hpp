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

// Test-only embedders and helpers.

#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "zeshot/backend.hpp"

namespace zeshot::testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(ZESHOT_FIXTURE_DIR) / rel;
}

// Wraps an embedder and counts calls and texts sent.
class CountingEmbedder : public Embedder {
 public:
  explicit CountingEmbedder(std::shared_ptr<const Embedder> inner) : inner_(std::move(inner)) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    ++calls_;
    texts_ += texts.size();
    {
      std::lock_guard lock(mutex_);
      batch_sizes_.push_back(texts.size());
    }
    return inner_->embed(texts);
  }

  std::size_t calls() const { return calls_; }
  std::size_t texts() const { return texts_; }
  std::vector<std::size_t> batch_sizes() const {
    std::lock_guard lock(mutex_);
    return batch_sizes_;
  }

 private:
  std::shared_ptr<const Embedder> inner_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<std::size_t> texts_{0};
  mutable std::mutex mutex_;
  mutable std::vector<std::size_t> batch_sizes_;
};

// Per-text embedding chosen by a function of the text.
class FunctionEmbedder : public Embedder {
 public:
  explicit FunctionEmbedder(std::function<std::vector<double>(const std::string&)> fn)
      : fn_(std::move(fn)) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) out.emplace_back(fn_(t));
    return out;
  }

 private:
  std::function<std::vector<double>(const std::string&)> fn_;
};

// Fixed table; texts not in the table fall back to mock_embed.
inline std::shared_ptr<FunctionEmbedder> table_embedder(std::map<std::string, std::vector<double>> table) {
  return std::make_shared<FunctionEmbedder>([table = std::move(table)](const std::string& t) {
    if (auto it = table.find(t); it != table.end()) return it->second;
    auto v = mock_embed(t);
    return std::vector<double>(v.values().begin(), v.values().end());
  });
}

// Dense pseudo-random vector per distinct text, fixed by (seed, text).
inline std::shared_ptr<FunctionEmbedder> random_embedder(std::uint64_t seed, std::size_t dim) {
  return std::make_shared<FunctionEmbedder>([seed, dim](const std::string& t) {
    std::mt19937_64 rng(seed ^ fnv1a64(t));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = dist(rng);
    return v;
  });
}

// Identical vector for every text.
inline std::shared_ptr<FunctionEmbedder> constant_embedder(std::vector<double> v) {
  return std::make_shared<FunctionEmbedder>([v = std::move(v)](const std::string&) { return v; });
}

// Multiplies each vector produced by `inner` by a positive factor that
// depends only on the text.
class ScaledEmbedder : public Embedder {
 public:
  ScaledEmbedder(std::shared_ptr<const Embedder> inner, std::uint64_t seed)
      : inner_(std::move(inner)), seed_(seed) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    auto vectors = inner_->embed(texts);
    std::vector<EmbeddingVector> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::mt19937_64 rng(seed_ ^ fnv1a64(texts[i]));
      const double factor = std::exp(std::uniform_real_distribution<double>(-5.0, 5.0)(rng));
      std::vector<double> v(vectors[i].values().begin(), vectors[i].values().end());
      for (auto& x : v) x *= factor;
      out.emplace_back(std::move(v));
    }
    return out;
  }

 private:
  std::shared_ptr<const Embedder> inner_;
  std::uint64_t seed_;
};

// Random lowercase word of 3..8 letters.
inline std::string random_word(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(3, 8);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::string w(static_cast<std::size_t>(len(rng)), 'a');
  for (auto& c : w) c = static_cast<char>(letter(rng));
  return w;
}

inline std::string random_phrase(std::mt19937_64& rng, int min_words, int max_words) {
  std::uniform_int_distribution<int> n(min_words, max_words);
  std::string out;
  for (int i = n(rng); i > 0; --i) {
    if (!out.empty()) out.push_back(' ');
    out += random_word(rng);
  }
  return out;
}

}  // namespace zeshot::testing
