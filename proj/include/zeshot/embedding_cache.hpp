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

#pragma once

#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"

namespace zeshot {

// LRU map from exact text to its embedding. Thread-safe.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(Errc::validation, "embedding cache capacity must be positive");
  }

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<EmbeddingVector> get(const std::string& text) {
    std::lock_guard lock(mutex_);
    return get_locked(text);
  }

  void put(const std::string& text, EmbeddingVector vector) {
    std::lock_guard lock(mutex_);
    put_locked(text, std::move(vector));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }
  std::size_t misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
  }

 private:
  using Order = std::list<std::pair<std::string, EmbeddingVector>>;

  friend std::vector<EmbeddingVector> cached_embed(EmbeddingCache&, const Embedder&,
                                                   std::span<const std::string>);

  std::optional<EmbeddingVector> get_locked(const std::string& text) {
    auto it = index_.find(text);
    if (it == index_.end()) {
      ++misses_;
      return std::nullopt;
    }
    ++hits_;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put_locked(const std::string& text, EmbeddingVector vector) {
    if (auto it = index_.find(text); it != index_.end()) {
      it->second->second = std::move(vector);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(text, std::move(vector));
    index_.emplace(text, order_.begin());
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  Order order_;  // most recent first
  std::unordered_map<std::string, Order::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Returns vectors in input order. Misses go to `embedder` as a single batch
// (deduplicated, first-seen order); nothing is inserted if that batch fails.
inline std::vector<EmbeddingVector> cached_embed(EmbeddingCache& cache, const Embedder& embedder,
                                                 std::span<const std::string> texts) {
  check_embed_request(texts);
  std::vector<std::optional<EmbeddingVector>> found(texts.size());
  std::vector<std::string> missing;
  {
    std::lock_guard lock(cache.mutex_);
    std::unordered_set<std::string> queued;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      found[i] = cache.get_locked(texts[i]);
      if (!found[i] && queued.insert(texts[i]).second) missing.push_back(texts[i]);
    }
  }

  std::unordered_map<std::string, EmbeddingVector> fetched;
  if (!missing.empty()) {
    auto reply = embedder.embed(missing);
    check_embed_reply(missing.size(), reply);
    for (std::size_t i = 0; i < missing.size(); ++i) fetched.emplace(missing[i], reply[i]);
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(found[i] ? std::move(*found[i]) : fetched.at(texts[i]));
  }
  if (!fetched.empty()) {
    std::lock_guard lock(cache.mutex_);
    for (const auto& text : missing) cache.put_locked(text, fetched.at(text));
  }
  check_embed_reply(texts.size(), out);
  return out;
}

// Embedder decorator that routes every batch through an EmbeddingCache.
class CachingEmbedder : public Embedder {
 public:
  CachingEmbedder(std::shared_ptr<const Embedder> inner, std::size_t capacity)
      : inner_(std::move(inner)), cache_(std::make_shared<EmbeddingCache>(capacity)) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    return cached_embed(*cache_, *inner_, texts);
  }

  const EmbeddingCache& cache() const { return *cache_; }

 private:
  std::shared_ptr<const Embedder> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace zeshot
