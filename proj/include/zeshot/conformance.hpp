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

// Wire-protocol conformance checks, runnable against any backend that claims
// to speak the protocol (the in-process mocks or a real model server).

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"
#include "zeshot/wire.hpp"

namespace zeshot::conformance {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

// A decodable 1x1 RGBA PNG, so real image models accept the probe.
inline constexpr std::string_view kProbePngBase64 =
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==";

inline bool is_error_reply(int status, const std::string& body) {
  if (status < 400 || status > 599) return false;
  const auto j = nlohmann::json::parse(body, nullptr, false);
  return j.is_object() && j.contains("error") && j.at("error").is_string();
}

inline std::vector<Check> run(const BackendEndpoint& generator, const BackendEndpoint& embedder) {
  std::vector<Check> checks;
  auto check = [&](std::string name, const std::function<std::string()>& body) {
    Check c{std::move(name), false, {}};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };

  const wire::HttpClient gen(generator);
  const wire::HttpClient emb(embedder);

  for (const auto* client : {&gen, &emb}) {
    check("health " + client->endpoint().base_url, [client]() -> std::string {
      auto [status, body] = client->raw("GET", "/v1/health");
      const auto j = nlohmann::json::parse(body, nullptr, false);
      if (status != 200) return "status " + std::to_string(status);
      if (!j.is_object() || j.value("status", std::string()) != "ok") return "status field is not \"ok\"";
      if (!j.contains("model") || !j.at("model").is_string()) return "no string \"model\"";
      return {};
    });
  }

  check("embed: identical texts give identical vectors", [&]() -> std::string {
    auto [status, body] = emb.raw("POST", "/v1/embed", R"({"texts":["a","a"]})");
    if (status != 200) return "status " + std::to_string(status);
    const auto vectors = wire::decode_embeddings(nlohmann::json::parse(body));
    if (vectors.size() != 2) return "expected 2 vectors, got " + std::to_string(vectors.size());
    if (!(vectors[0] == vectors[1])) return "vectors differ";
    return {};
  });

  check("embed: one vector per text with one dim", [&]() -> std::string {
    auto [status, body] = emb.raw(
        "POST", "/v1/embed",
        R"({"texts":["Is the road flooded? yes","Is the road flooded? no","How dense is the area? low"]})");
    if (status != 200) return "status " + std::to_string(status);
    const auto j = nlohmann::json::parse(body);
    const auto vectors = wire::decode_embeddings(j);
    if (vectors.size() != 3) return "expected 3 vectors, got " + std::to_string(vectors.size());
    for (const auto& v : vectors) {
      if (static_cast<std::int64_t>(v.dim()) != j.at("dim").get<std::int64_t>()) return "row length != dim";
    }
    return {};
  });

  check("embed: empty batch is an error reply", [&]() -> std::string {
    auto [status, body] = emb.raw("POST", "/v1/embed", R"({"texts":[]})");
    return is_error_reply(status, body) && status < 500 ? "" : "expected 4xx {\"error\"}, got " + std::to_string(status);
  });

  check("embed: malformed body is a 400", [&]() -> std::string {
    auto [status, body] = emb.raw("POST", "/v1/embed", "{not json");
    return status == 400 && is_error_reply(status, body) ? "" : "expected 400 {\"error\"}, got " + std::to_string(status);
  });

  check("generate: inline image returns an answer", [&]() -> std::string {
    const nlohmann::json req{{"image", {{"b64", kProbePngBase64}, {"media_type", "image/png"}}},
                             {"question", "Is the entire road flooded? yes, no"}};
    auto [status, body] = gen.raw("POST", "/v1/generate", req.dump());
    if (status != 200) return "status " + std::to_string(status) + " " + body;
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (!j.is_object() || !j.contains("answer") || !j.at("answer").is_string()) return "no string \"answer\"";
    if (text::trim(j.at("answer").get<std::string>()).empty()) return "empty answer";
    return {};
  });

  check("generate: missing question is a 400", [&]() -> std::string {
    const nlohmann::json req{{"image", {{"b64", kProbePngBase64}, {"media_type", "image/png"}}}};
    auto [status, body] = gen.raw("POST", "/v1/generate", req.dump());
    return status == 400 && is_error_reply(status, body) ? "" : "expected 400 {\"error\"}, got " + std::to_string(status);
  });

  check("generate: image without locator is a 4xx", [&]() -> std::string {
    auto [status, body] = gen.raw("POST", "/v1/generate", R"({"image":{},"question":"Q?"})");
    return is_error_reply(status, body) && status < 500 ? "" : "expected 4xx {\"error\"}, got " + std::to_string(status);
  });

  check("client: HttpGenerator and HttpEmbedder round trip", [&]() -> std::string {
    const auto png = wire::base64_decode(kProbePngBase64);
    const wire::HttpGenerator g(generator);
    const RawAnswer a = g.generate(ImageRef::from_bytes(*png, "image/png"), "What is the overall condition of the given image? flooded, non-flooded");
    if (text::trim(a.text).empty()) return "empty answer";
    const wire::HttpEmbedder e(embedder);
    const std::vector<std::string> texts{"flooded road", "road flooded"};
    const auto v = e.embed(texts);
    if (v.size() != 2 || v[0].dim() != v[1].dim()) return "bad embed reply";
    return {};
  });

  return checks;
}

inline bool all_passed(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return !checks.empty();
}

}  // namespace zeshot::conformance
