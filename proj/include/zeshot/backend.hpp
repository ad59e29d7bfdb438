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

// Contracts for the answer generator and the text embedder, and the
// deterministic in-process mocks used for hermetic runs.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "zeshot/error.hpp"
#include "zeshot/text.hpp"

namespace zeshot {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

// An input image. Exactly one locator form is held.
struct ImageRef {
  struct Path {
    std::filesystem::path path;
    bool operator==(const Path&) const = default;
  };
  struct Url {
    std::string url;
    bool operator==(const Url&) const = default;
  };
  struct Inline {
    std::string bytes;
    std::string media_type;
    bool operator==(const Inline&) const = default;
  };

  std::variant<Path, Url, Inline> locator;
  std::string id;

  bool operator==(const ImageRef&) const = default;

  static ImageRef from_path(std::filesystem::path path, std::string id = {}) {
    if (id.empty()) id = path.generic_string();
    return ImageRef{Path{std::move(path)}, std::move(id)};
  }
  static ImageRef from_url(std::string url, std::string id = {}) {
    if (id.empty()) id = url;
    return ImageRef{Url{std::move(url)}, std::move(id)};
  }
  // Inline images without an id are named by the hash of their bytes.
  static ImageRef from_bytes(std::string bytes, std::string media_type, std::string id = {}) {
    if (id.empty()) id = "fnv1a64:" + hex64(fnv1a64(bytes));
    return ImageRef{Inline{std::move(bytes), std::move(media_type)}, std::move(id)};
  }

  // "http://..." and "https://..." become URLs; anything else a path,
  // resolved against `base_dir` when relative. The id is `locator` verbatim.
  static ImageRef from_locator(const std::string& locator,
                               const std::filesystem::path& base_dir = {}) {
    if (locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0) {
      return from_url(locator, locator);
    }
    std::filesystem::path p(locator);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return from_path(std::move(p), locator);
  }

  std::string_view kind() const {
    switch (locator.index()) {
      case 0: return "path";
      case 1: return "url";
      default: return "inline";
    }
  }
};

inline nlohmann::json to_json(const ImageRef& image) {
  nlohmann::json j{{"id", image.id}, {"kind", image.kind()}};
  if (const auto* p = std::get_if<ImageRef::Path>(&image.locator)) {
    j["locator"] = p->path.generic_string();
  } else if (const auto* u = std::get_if<ImageRef::Url>(&image.locator)) {
    j["locator"] = u->url;
  } else {
    const auto& in = std::get<ImageRef::Inline>(image.locator);
    j["media_type"] = in.media_type;
    j["size"] = in.bytes.size();
  }
  return j;
}

inline std::string media_type_for(const std::filesystem::path& path) {
  const std::string ext = text::to_lower(path.extension().string());
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".tif" || ext == ".tiff") return "image/tiff";
  if (ext == ".bmp") return "image/bmp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read image " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RawAnswer {
  std::string text;
  std::int64_t latency_ms = 0;
};

// Throws Error(empty_answer) if `text` is blank.
inline RawAnswer make_raw_answer(std::string text, std::int64_t latency_ms = 0) {
  if (text::trim(text).empty()) throw Error(Errc::empty_answer, "backend returned an empty answer");
  return RawAnswer{std::move(text), latency_ms};
}

// Fixed-dimension vector of finite reals.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(Errc::validation, "embedding must have positive dimension");
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(Errc::validation, "embedding has a non-finite component");
    }
  }

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

enum class BackendKind { generator, embedder };

struct BackendEndpoint {
  std::string base_url;
  BackendKind kind = BackendKind::generator;
  int timeout_ms = 30000;
  std::optional<std::string> auth_token;

  void validate() const {
    if (base_url.empty()) throw Error(Errc::validation, "backend endpoint has no base_url");
    if (timeout_ms <= 0) throw Error(Errc::validation, "backend timeout_ms must be positive");
  }
};

// f(I, Q^): image-grounded answer generation. Implementations must be safe
// for concurrent calls and must not alter the question text.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual RawAnswer generate(const ImageRef& image, std::string_view question) const = 0;
};

// g(text): text embedding. One vector per input, same order, same dim.
// Implementations must be safe for concurrent calls.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

// Rejects empty batches and blank texts.
inline void check_embed_request(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(Errc::precondition, "embed request has no texts");
  for (const auto& t : texts) {
    if (text::trim(t).empty()) throw Error(Errc::precondition, "embed request has an empty text");
  }
}

// Verifies count and dim agreement of an embedder reply.
inline void check_embed_reply(std::size_t requested, const std::vector<EmbeddingVector>& reply) {
  if (reply.size() != requested) {
    throw Error(Errc::count_mismatch, "embedder returned " + std::to_string(reply.size()) +
                                          " vectors for " + std::to_string(requested) + " texts");
  }
  for (const auto& v : reply) {
    if (v.dim() == 0 || v.dim() != reply.front().dim()) {
      throw Error(Errc::dimension_mismatch, "embedder returned vectors of differing dimension");
    }
  }
}

// Embeds through any Embedder and enforces the batch contract on the reply.
inline std::vector<EmbeddingVector> embed_texts(const Embedder& embedder,
                                                std::span<const std::string> texts) {
  check_embed_request(texts);
  auto reply = embedder.embed(texts);
  check_embed_reply(texts.size(), reply);
  return reply;
}

inline constexpr std::size_t kMockEmbeddingDim = 64;

// Lowercased whitespace tokens with non-alphanumeric characters stripped
// from both edges; empty tokens dropped.
inline std::vector<std::string> mock_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  const std::string lower = text::to_lower(s);
  std::string_view rest = lower;
  while (!rest.empty()) {
    while (!rest.empty() && text::is_space(rest.front())) rest.remove_prefix(1);
    std::size_t end = 0;
    while (end < rest.size() && !text::is_space(rest[end])) ++end;
    std::string_view tok = rest.substr(0, end);
    rest.remove_prefix(end);
    while (!tok.empty() && !text::is_alnum(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && !text::is_alnum(tok.back())) tok.remove_suffix(1);
    if (!tok.empty()) tokens.emplace_back(tok);
  }
  return tokens;
}

// Bag-of-tokens hash embedding: +1.0 at fnv1a64(token) mod 64 per token.
inline EmbeddingVector mock_embed(std::string_view s) {
  const auto tokens = mock_tokens(s);
  if (tokens.empty()) {
    throw Error(Errc::precondition, "mock_embed: text has no tokens: \"" + std::string(s) + "\"");
  }
  std::vector<double> v(kMockEmbeddingDim, 0.0);
  for (const auto& tok : tokens) v[fnv1a64(tok) % kMockEmbeddingDim] += 1.0;
  return EmbeddingVector(std::move(v));
}

class MockEmbedder : public Embedder {
 public:
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    check_embed_request(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embed(t));
    return out;
  }
};

// Scripted generator keyed by (image id, question text). "*" as the image id
// matches any image. Lookup order: exact key, wildcard key, default answer.
class MockGenerator : public Generator {
 public:
  static constexpr std::string_view kAnyImage = "*";

  MockGenerator() = default;
  explicit MockGenerator(std::optional<std::string> default_answer)
      : default_answer_(std::move(default_answer)) {}

  // {"default": str|null, "answers": [{"image": str, "question": str, "answer": str}]}
  static MockGenerator from_json(const nlohmann::json& doc) {
    try {
      MockGenerator gen;
      if (doc.contains("default") && !doc.at("default").is_null()) {
        gen.default_answer_ = doc.at("default").get<std::string>();
      }
      if (doc.contains("answers")) {
        for (const auto& a : doc.at("answers")) {
          gen.set(a.value("image", std::string(kAnyImage)), a.at("question").get<std::string>(),
                  a.at("answer").get<std::string>());
        }
      }
      return gen;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::parse, std::string("malformed mock script: ") + ex.what());
    }
  }

  static MockGenerator load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open mock script " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::parse, path.string() + " is not valid JSON");
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    nlohmann::json answers = nlohmann::json::array();
    for (const auto& [key, answer] : script_) {
      answers.push_back({{"image", key.first}, {"question", key.second}, {"answer", answer}});
    }
    nlohmann::json def = default_answer_ ? nlohmann::json(*default_answer_) : nlohmann::json();
    return {{"default", def}, {"answers", std::move(answers)}};
  }

  void set(std::string image_id, std::string question, std::string answer) {
    script_[{std::move(image_id), std::move(question)}] = std::move(answer);
  }
  void set_default(std::optional<std::string> answer) { default_answer_ = std::move(answer); }

  RawAnswer generate(const ImageRef& image, std::string_view question) const override {
    const std::string q(question);
    if (auto it = script_.find({image.id, q}); it != script_.end()) {
      return make_raw_answer(it->second);
    }
    if (auto it = script_.find({std::string(kAnyImage), q}); it != script_.end()) {
      return make_raw_answer(it->second);
    }
    if (default_answer_) return make_raw_answer(*default_answer_);
    throw Error(Errc::missing_key,
                "mock generator has no answer for (" + image.id + ", \"" + q + "\")");
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> script_;
  std::optional<std::string> default_answer_;
};

}  // namespace zeshot
