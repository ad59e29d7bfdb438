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

// Backend wire protocol (HTTP + JSON):
//
//   POST /v1/generate  {"image": {"b64": str, "media_type": str} | {"url": str},
//                       "question": str}
//                      -> 200 {"answer": str}
//   POST /v1/embed     {"texts": [str, ...]}
//                      -> 200 {"dim": int, "embeddings": [[float, ...], ...]}
//   GET  /v1/health    -> 200 {"status": "ok", "model": str}
//
// Errors are 4xx/5xx with {"error": str}. An optional bearer token guards
// every route.

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"

namespace zeshot::wire {

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t n = (static_cast<unsigned char>(in[i]) << 16) |
                            (static_cast<unsigned char>(in[i + 1]) << 8) |
                            static_cast<unsigned char>(in[i + 2]);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
  }
  if (const std::size_t rest = in.size() - i; rest > 0) {
    std::uint32_t n = static_cast<unsigned char>(in[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(in[i + 1]) << 8;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(n >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

// Standard alphabet, padding optional, whitespace ignored. nullopt if malformed.
inline std::optional<std::string> base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  std::uint32_t buf = 0;
  int bits = 0;
  bool padding = false;
  for (char c : in) {
    if (text::is_space(c)) continue;
    if (c == '=') {
      padding = true;
      continue;
    }
    const int v = value(c);
    if (v < 0 || padding) return std::nullopt;
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buf >> bits) & 0xff));
    }
  }
  if (bits >= 6) return std::nullopt;
  return out;
}

// Path images are sent inline; the backend cannot see the caller's disk.
inline nlohmann::json encode_image(const ImageRef& image) {
  if (const auto* u = std::get_if<ImageRef::Url>(&image.locator)) return {{"url", u->url}};
  if (const auto* p = std::get_if<ImageRef::Path>(&image.locator)) {
    return {{"b64", base64_encode(read_file_bytes(p->path))}, {"media_type", media_type_for(p->path)}};
  }
  const auto& in = std::get<ImageRef::Inline>(image.locator);
  return {{"b64", base64_encode(in.bytes)}, {"media_type", in.media_type}};
}

// Inverse of encode_image on the server side. URL images keep the URL as id;
// inline images are named by content hash.
inline ImageRef decode_image(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::parse, "\"image\" must be an object");
  if (j.contains("url")) {
    if (!j.at("url").is_string()) throw Error(Errc::parse, "\"image.url\" must be a string");
    return ImageRef::from_url(j.at("url").get<std::string>());
  }
  if (j.contains("b64")) {
    if (!j.at("b64").is_string()) throw Error(Errc::parse, "\"image.b64\" must be a string");
    auto bytes = base64_decode(j.at("b64").get<std::string>());
    if (!bytes) throw Error(Errc::parse, "\"image.b64\" is not valid base64");
    std::string media_type = j.value("media_type", std::string("application/octet-stream"));
    return ImageRef::from_bytes(std::move(*bytes), std::move(media_type));
  }
  throw Error(Errc::parse, "\"image\" needs either \"b64\" or \"url\"");
}

inline nlohmann::json encode_embeddings(const std::vector<EmbeddingVector>& vectors) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& v : vectors) rows.push_back(std::vector<double>(v.values().begin(), v.values().end()));
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().dim();
  return {{"dim", dim}, {"embeddings", std::move(rows)}};
}

inline std::vector<EmbeddingVector> decode_embeddings(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("embeddings") ||
      !j.at("dim").is_number_integer() || !j.at("embeddings").is_array()) {
    throw Error(Errc::parse, "embed reply needs integer \"dim\" and array \"embeddings\"");
  }
  const auto dim = j.at("dim").get<std::int64_t>();
  if (dim <= 0) throw Error(Errc::dimension_mismatch, "embed reply reports non-positive dim");
  std::vector<EmbeddingVector> out;
  for (const auto& row : j.at("embeddings")) {
    if (!row.is_array()) throw Error(Errc::parse, "embedding rows must be arrays");
    if (static_cast<std::int64_t>(row.size()) != dim) {
      throw Error(Errc::dimension_mismatch, "embedding row has " + std::to_string(row.size()) +
                                                " values, reply dim is " + std::to_string(dim));
    }
    std::vector<double> values;
    values.reserve(row.size());
    for (const auto& x : row) {
      if (!x.is_number()) throw Error(Errc::parse, "embedding values must be numbers");
      values.push_back(x.get<double>());
    }
    out.emplace_back(std::move(values));
  }
  return out;
}

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;  // no trailing slash
};

inline ParsedUrl parse_base_url(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) {
    throw Error(Errc::validation, "backend URL needs a scheme: " + std::string(url));
  }
  const auto slash = url.find('/', scheme + 3);
  ParsedUrl out;
  out.scheme_host_port = std::string(url.substr(0, slash));
  if (slash != std::string_view::npos) {
    std::string_view path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.remove_suffix(1);
    out.path_prefix = std::string(path);
  }
  return out;
}

// Thin JSON-over-HTTP client for one backend endpoint. A fresh connection is
// opened per call so instances can be shared across threads.
class HttpClient {
 public:
  explicit HttpClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.validate();
    url_ = parse_base_url(endpoint_.base_url);
  }

  const BackendEndpoint& endpoint() const { return endpoint_; }

  nlohmann::json get(const std::string& route) const { return call("GET", route, nullptr); }
  nlohmann::json post(const std::string& route, const nlohmann::json& body) const {
    return call("POST", route, &body);
  }

  // Raw reply for conformance checks; throws only on transport failure.
  std::pair<int, std::string> raw(const std::string& method, const std::string& route,
                                  const std::string& body = {}) const {
    auto cli = make_client();
    const std::string path = url_.path_prefix + route;
    httplib::Result res = method == "GET" ? cli->Get(path)
                                          : cli->Post(path, body, "application/json");
    if (!res) throw transport_error(res.error());
    return {res->status, res->body};
  }

 private:
  std::unique_ptr<httplib::Client> make_client() const {
    auto cli = std::make_unique<httplib::Client>(url_.scheme_host_port);
    const auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
    cli->set_connection_timeout(timeout);
    cli->set_read_timeout(timeout);
    cli->set_write_timeout(timeout);
    if (endpoint_.auth_token) cli->set_bearer_token_auth(*endpoint_.auth_token);
    return cli;
  }

  Error transport_error(httplib::Error err) const {
    const Errc code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? Errc::timeout
                          : Errc::transport;
    return Error(code, endpoint_.base_url + ": " + httplib::to_string(err));
  }

  nlohmann::json call(const char* method, const std::string& route,
                      const nlohmann::json* body) const {
    auto cli = make_client();
    const std::string path = url_.path_prefix + route;
    httplib::Result res = body == nullptr ? cli->Get(path)
                                          : cli->Post(path, body->dump(), "application/json");
    if (!res) throw transport_error(res.error());
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status != 200) {
      std::string message = "HTTP " + std::to_string(res->status);
      if (reply.is_object() && reply.contains("error") && reply.at("error").is_string()) {
        message += ": " + reply.at("error").get<std::string>();
      }
      throw Error(Errc::backend_status,
                  endpoint_.base_url + " " + method + " " + route + " failed, " + message);
    }
    if (reply.is_discarded()) {
      throw Error(Errc::parse, endpoint_.base_url + route + " replied with invalid JSON");
    }
    return reply;
  }

  BackendEndpoint endpoint_;
  ParsedUrl url_;
};

// Remote f(I, Q^). Sends the question byte-for-byte.
class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(BackendEndpoint endpoint) : client_(with_kind(std::move(endpoint))) {}

  RawAnswer generate(const ImageRef& image, std::string_view question) const override {
    const auto start = std::chrono::steady_clock::now();
    nlohmann::json body{{"image", encode_image(image)}, {"question", std::string(question)}};
    const auto reply = client_.post("/v1/generate", body);
    if (!reply.is_object() || !reply.contains("answer") || !reply.at("answer").is_string()) {
      throw Error(Errc::parse, "generate reply has no string \"answer\"");
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return make_raw_answer(reply.at("answer").get<std::string>(), elapsed.count());
  }

  std::string health() const { return health_of(client_); }
  const BackendEndpoint& endpoint() const { return client_.endpoint(); }

  static std::string health_of(const HttpClient& client) {
    const auto reply = client.get("/v1/health");
    if (!reply.is_object() || reply.value("status", std::string()) != "ok") {
      throw Error(Errc::backend_status, client.endpoint().base_url + " is not healthy");
    }
    return reply.value("model", std::string());
  }

 private:
  static BackendEndpoint with_kind(BackendEndpoint e) {
    e.kind = BackendKind::generator;
    return e;
  }
  HttpClient client_;
};

// Remote g(text).
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(BackendEndpoint endpoint) : client_(with_kind(std::move(endpoint))) {}

  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    check_embed_request(texts);
    nlohmann::json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    auto vectors = decode_embeddings(client_.post("/v1/embed", body));
    check_embed_reply(texts.size(), vectors);
    return vectors;
  }

  std::string health() const { return HttpGenerator::health_of(client_); }
  const BackendEndpoint& endpoint() const { return client_.endpoint(); }

 private:
  static BackendEndpoint with_kind(BackendEndpoint e) {
    e.kind = BackendKind::embedder;
    return e;
  }
  HttpClient client_;
};

inline int http_status_for(Errc code) {
  switch (code) {
    case Errc::parse:
    case Errc::precondition:
    case Errc::validation:
      return 400;
    case Errc::missing_key:
    case Errc::not_found:
      return 404;
    default:
      return 500;
  }
}

inline void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, {{"error", message}});
}

// Serves a Generator and/or Embedder over the wire protocol. Either may be
// null, in which case its route answers 404.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<const Generator> generator,
                std::shared_ptr<const Embedder> embedder, std::string model = "mock",
                std::optional<std::string> auth_token = std::nullopt)
      : generator_(std::move(generator)),
        embedder_(std::move(embedder)),
        model_(std::move(model)),
        auth_token_(std::move(auth_token)) {
    install_routes();
  }

  ~BackendServer() { stop(); }

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  // Binds without serving. Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
      throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = bound;
    return bound;
  }

  // Serves on the calling thread until stop().
  void listen() { server_.listen_after_bind(); }

  // Serves on a background thread.
  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (!auth_token_) return true;
    if (req.get_header_value("Authorization") == "Bearer " + *auth_token_) return true;
    reply_error(res, 401, "missing or invalid bearer token");
    return false;
  }

  static std::optional<nlohmann::json> parse_body(const httplib::Request& req,
                                                  httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply_error(res, 400, "request body must be a JSON object");
      return std::nullopt;
    }
    return body;
  }

  void install_routes() {
    server_.Get("/v1/health", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      reply_json(res, 200, {{"status", "ok"}, {"model", model_}});
    });

    server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      if (!generator_) return reply_error(res, 404, "this server has no generator");
      auto body = parse_body(req, res);
      if (!body) return;
      if (!body->contains("image") || !body->contains("question") ||
          !body->at("question").is_string()) {
        return reply_error(res, 400, "generate needs \"image\" and string \"question\"");
      }
      try {
        const ImageRef image = decode_image(body->at("image"));
        const RawAnswer answer =
            generator_->generate(image, body->at("question").get<std::string>());
        reply_json(res, 200, {{"answer", answer.text}});
      } catch (const Error& e) {
        reply_error(res, http_status_for(e.code()), e.what());
      }
    });

    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      if (!embedder_) return reply_error(res, 404, "this server has no embedder");
      auto body = parse_body(req, res);
      if (!body) return;
      std::vector<std::string> texts;
      try {
        texts = body->at("texts").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception&) {
        return reply_error(res, 400, "embed needs \"texts\": [str, ...]");
      }
      try {
        reply_json(res, 200, encode_embeddings(embed_texts(*embedder_, texts)));
      } catch (const Error& e) {
        reply_error(res, http_status_for(e.code()), e.what());
      }
    });
  }

  std::shared_ptr<const Generator> generator_;
  std::shared_ptr<const Embedder> embedder_;
  std::string model_;
  std::optional<std::string> auth_token_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace zeshot::wire
