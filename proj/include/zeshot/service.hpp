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

// HTTP service in front of the pipeline and the evaluator.
//
//   GET  /api/health                 {"status": "ok"}
//   GET  /api/bank                   question bank document
//   GET  /api/images                 [{"id", "thumbnail_url"}] under the image root
//   GET  /api/images/{id}            image bytes
//   POST /api/ask                    {"image": id | {"b64", "media_type"} | {"url"},
//                                     "question": str, "session_id"?: str} -> AnswerRecord
//   POST /api/evaluate               {"dataset": path} | {"items": [...]} -> 202 {"job_id"}
//   GET  /api/jobs/{id}              job status, progress and, once done, the report
//   POST /api/jobs/{id}/cancel       cancel (DELETE /api/jobs/{id} also works)
//   GET  /api/sessions/{id}          SessionLog
//   POST /api/sessions/{id}/replay   re-run a session, compare final answers

#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"
#include "zeshot/evaluation.hpp"
#include "zeshot/pipeline.hpp"
#include "zeshot/question_bank.hpp"
#include "zeshot/wire.hpp"

namespace zeshot {

struct ServiceConfig {
  std::string listen_address = "127.0.0.1";
  int port = 8080;
  std::filesystem::path bank_path;
  BackendEndpoint generator{{}, BackendKind::generator, 30000, std::nullopt};
  BackendEndpoint embedder{{}, BackendKind::embedder, 30000, std::nullopt};
  std::size_t cache_capacity = 4096;
  std::size_t parallelism = 4;
  std::filesystem::path image_root;
  bool strict = false;  // fail startup when a backend health check fails
  std::optional<std::filesystem::path> static_dir;

  // Relative paths resolve against `base_dir`.
  static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    auto endpoint = [](const nlohmann::json& e, BackendEndpoint out) {
      out.base_url = e.value("base_url", out.base_url);
      out.timeout_ms = e.value("timeout_ms", out.timeout_ms);
      if (e.contains("auth_token") && e.at("auth_token").is_string()) {
        out.auth_token = e.at("auth_token").get<std::string>();
      }
      return out;
    };
    try {
      ServiceConfig c;
      c.listen_address = j.value("listen_address", c.listen_address);
      c.port = j.value("port", c.port);
      if (j.contains("bank_path")) c.bank_path = resolve(j.at("bank_path").get<std::string>());
      if (j.contains("generator")) c.generator = endpoint(j.at("generator"), c.generator);
      if (j.contains("embedder")) c.embedder = endpoint(j.at("embedder"), c.embedder);
      c.cache_capacity = j.value("cache_capacity", c.cache_capacity);
      c.parallelism = j.value("parallelism", c.parallelism);
      if (j.contains("image_root")) c.image_root = resolve(j.at("image_root").get<std::string>());
      c.strict = j.value("strict", c.strict);
      if (j.contains("static_dir")) c.static_dir = resolve(j.at("static_dir").get<std::string>());
      return c;
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::parse, std::string("malformed service config: ") + ex.what());
    }
  }

  // Reads a JSON config file, then applies ZESHOT_* environment overrides.
  static ServiceConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open config " + path.string());
    const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::parse, path.string() + " is not valid JSON");
    ServiceConfig c = from_json(j, path.parent_path());
    c.apply_env([](const char* name) -> std::optional<std::string> {
      const char* v = std::getenv(name);
      return v ? std::optional<std::string>(v) : std::nullopt;
    });
    return c;
  }

  using EnvLookup = std::function<std::optional<std::string>(const char*)>;

  void apply_env(const EnvLookup& env) {
    auto number = [](const char* name, const std::string& v) {
      try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
      } catch (const std::exception&) {
        throw Error(Errc::parse, std::string(name) + " is not an integer: " + v);
      }
    };
    if (auto v = env("ZESHOT_LISTEN_ADDRESS")) listen_address = *v;
    if (auto v = env("ZESHOT_PORT")) port = static_cast<int>(number("ZESHOT_PORT", *v));
    if (auto v = env("ZESHOT_BANK_PATH")) bank_path = *v;
    if (auto v = env("ZESHOT_GENERATOR_URL")) generator.base_url = *v;
    if (auto v = env("ZESHOT_GENERATOR_TIMEOUT_MS")) generator.timeout_ms = static_cast<int>(number("ZESHOT_GENERATOR_TIMEOUT_MS", *v));
    if (auto v = env("ZESHOT_GENERATOR_TOKEN")) generator.auth_token = *v;
    if (auto v = env("ZESHOT_EMBEDDER_URL")) embedder.base_url = *v;
    if (auto v = env("ZESHOT_EMBEDDER_TIMEOUT_MS")) embedder.timeout_ms = static_cast<int>(number("ZESHOT_EMBEDDER_TIMEOUT_MS", *v));
    if (auto v = env("ZESHOT_EMBEDDER_TOKEN")) embedder.auth_token = *v;
    if (auto v = env("ZESHOT_CACHE_CAPACITY")) cache_capacity = static_cast<std::size_t>(number("ZESHOT_CACHE_CAPACITY", *v));
    if (auto v = env("ZESHOT_PARALLELISM")) parallelism = static_cast<std::size_t>(number("ZESHOT_PARALLELISM", *v));
    if (auto v = env("ZESHOT_IMAGE_ROOT")) image_root = *v;
    if (auto v = env("ZESHOT_STRICT")) strict = (*v == "1" || *v == "true");
    if (auto v = env("ZESHOT_STATIC_DIR")) static_dir = *v;
  }

  void validate() const {
    if (port < 1 || port > 65535) throw Error(Errc::validation, "port must be in [1, 65535], got " + std::to_string(port));
    if (!std::filesystem::is_regular_file(bank_path)) {
      throw Error(Errc::not_found, "question bank not found: " + bank_path.string());
    }
    if (!std::filesystem::is_directory(image_root)) {
      throw Error(Errc::not_found, "image root is not a directory: " + image_root.string());
    }
    if (static_dir && !std::filesystem::is_directory(*static_dir)) {
      throw Error(Errc::not_found, "static asset directory not found: " + static_dir->string());
    }
    generator.validate();
    embedder.validate();
    if (parallelism == 0) throw Error(Errc::validation, "parallelism must be positive");
  }
};

struct SessionEntry {
  std::int64_t timestamp_us = 0;
  AnswerRecord record;
};

// Append-only per-session answer logs. Timestamps within a session are
// strictly increasing.
class SessionStore {
 public:
  std::int64_t append(const std::string& session_id, AnswerRecord record) {
    const auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    std::lock_guard lock(mutex_);
    auto& log = sessions_[session_id];
    const std::int64_t ts = log.empty() ? now : std::max<std::int64_t>(now, log.back().timestamp_us + 1);
    log.push_back({ts, std::move(record)});
    return ts;
  }

  std::optional<std::vector<SessionEntry>> get(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<SessionEntry>> sessions_;
};

inline nlohmann::json session_to_json(const std::string& id, const std::vector<SessionEntry>& log) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& e : log) records.push_back({{"timestamp_us", e.timestamp_us}, {"record", to_json(e.record)}});
  return {{"session_id", id}, {"records", std::move(records)}};
}

enum class JobStatus { queued, running, completed, cancelled, failed };

inline std::string_view to_label(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::completed: return "completed";
    case JobStatus::cancelled: return "cancelled";
    case JobStatus::failed: return "failed";
  }
  return "";
}

// Asynchronous evaluation jobs, one thread each. A cancelled job drops its
// partial report.
class JobManager {
 public:
  JobManager() = default;
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;
  ~JobManager() { shutdown(); }

  std::string submit(std::shared_ptr<const Pipeline> pipeline, std::vector<EvalItem> items,
                     std::size_t parallelism) {
    auto job = std::make_shared<Job>();
    job->total = items.size();
    std::string id;
    {
      std::lock_guard lock(mutex_);
      id = "job-" + std::to_string(++counter_);
      job->id = id;
      jobs_[id] = job;
    }
    job->thread = std::jthread([job, pipeline = std::move(pipeline), items = std::move(items), parallelism] {
      job->set_status(JobStatus::running);
      EvalOptions options;
      options.parallelism = parallelism;
      options.cancel = &job->cancel;
      options.on_progress = [&](std::size_t done, std::size_t) { job->done = done; };
      try {
        EvalReport report = evaluate(*pipeline, items, options);
        std::lock_guard lock(job->mutex);
        job->report = std::move(report);
        job->status = JobStatus::completed;
      } catch (const Error& e) {
        std::lock_guard lock(job->mutex);
        job->status = e.code() == Errc::cancelled ? JobStatus::cancelled : JobStatus::failed;
        if (job->status == JobStatus::failed) job->error = e.what();
      } catch (const std::exception& e) {
        std::lock_guard lock(job->mutex);
        job->status = JobStatus::failed;
        job->error = e.what();
      }
    });
    return id;
  }

  std::optional<nlohmann::json> status(const std::string& id) const {
    auto job = find(id);
    if (!job) return std::nullopt;
    std::lock_guard lock(job->mutex);
    nlohmann::json j{{"job_id", job->id},
                     {"status", to_label(job->status)},
                     {"progress", {{"done", job->done.load()}, {"total", job->total}}}};
    if (job->report) j["report"] = to_json(*job->report);
    if (!job->error.empty()) j["error"] = job->error;
    return j;
  }

  // False if the job does not exist. Finished jobs keep their status.
  bool cancel(const std::string& id) {
    auto job = find(id);
    if (!job) return false;
    job->cancel = true;
    std::lock_guard lock(job->mutex);
    if (job->status == JobStatus::queued) job->status = JobStatus::cancelled;
    return true;
  }

  // Blocks until the job leaves queued/running.
  void wait(const std::string& id) const {
    auto job = find(id);
    if (!job) return;
    for (;;) {
      {
        std::lock_guard lock(job->mutex);
        if (job->status != JobStatus::queued && job->status != JobStatus::running) return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }

  void shutdown() {
    std::map<std::string, std::shared_ptr<Job>> jobs;
    {
      std::lock_guard lock(mutex_);
      jobs = jobs_;
    }
    for (auto& [_, job] : jobs) {
      job->cancel = true;
      if (job->thread.joinable()) job->thread.join();
    }
  }

 private:
  struct Job {
    std::string id;
    std::size_t total = 0;
    std::atomic<std::size_t> done{0};
    std::atomic<bool> cancel{false};
    mutable std::mutex mutex;
    JobStatus status = JobStatus::queued;
    std::optional<EvalReport> report;
    std::string error;
    std::jthread thread;

    void set_status(JobStatus s) {
      std::lock_guard lock(mutex);
      if (status == JobStatus::queued) status = s;
    }
  };

  std::shared_ptr<Job> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(id);
    return it == jobs_.end() ? nullptr : it->second;
  }

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::size_t counter_ = 0;
};

struct ServiceOptions {
  std::filesystem::path image_root;
  std::size_t cache_capacity = 4096;
  std::size_t parallelism = 4;
  std::optional<std::filesystem::path> static_dir;
};

class Service {
 public:
  struct Reply {
    int status = 200;
    nlohmann::json body;
  };

  Service(std::shared_ptr<const QuestionBank> bank, std::shared_ptr<const Generator> generator,
          std::shared_ptr<const Embedder> embedder, ServiceOptions options)
      : options_(std::move(options)),
        pipeline_(std::make_shared<Pipeline>(std::move(bank), std::move(generator),
                                             std::move(embedder), options_.cache_capacity)) {
    install_routes();
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host)
                                : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(Errc::io, "cannot listen on " + host + ":" + std::to_string(port) + " (port in use?)");
    port_ = bound;
    return bound;
  }

  void listen() { server_.listen_after_bind(); }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  // Stops accepting, drains in-flight requests and cancels running jobs.
  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
    jobs_.shutdown();
  }

  int port() const { return port_; }
  const Pipeline& pipeline() const { return *pipeline_; }
  JobManager& jobs() { return jobs_; }

  Reply health() const { return {200, {{"status", "ok"}}}; }
  Reply bank() const { return {200, pipeline_->bank().to_json()}; }

  Reply images() const {
    nlohmann::json list = nlohmann::json::array();
    std::error_code ec;
    std::vector<std::string> ids;
    for (std::filesystem::recursive_directory_iterator it(options_.image_root, ec), end; !ec && it != end;
         it.increment(ec)) {
      if (!it->is_regular_file() || media_type_for(it->path()).rfind("image/", 0) != 0) continue;
      ids.push_back(std::filesystem::relative(it->path(), options_.image_root).generic_string());
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) list.push_back({{"id", id}, {"thumbnail_url", "/api/images/" + id}});
    return {200, list};
  }

  // nullopt when `id` escapes the image root or names no regular file.
  std::optional<std::filesystem::path> resolve_image(const std::string& id) const {
    const std::filesystem::path rel(id);
    if (id.empty() || rel.is_absolute()) return std::nullopt;
    for (const auto& part : rel) {
      if (part == "..") return std::nullopt;
    }
    const auto path = options_.image_root / rel;
    if (!std::filesystem::is_regular_file(path)) return std::nullopt;
    return path;
  }

  Reply ask(const nlohmann::json& req) {
    if (!req.is_object() || !req.contains("question") || !req.at("question").is_string() ||
        text::trim(req.at("question").get<std::string>()).empty()) {
      return error(400, "ask needs a non-empty string \"question\"");
    }
    if (!req.contains("image")) return error(400, "ask needs \"image\"");
    std::optional<std::string> session;
    if (req.contains("session_id")) {
      if (!req.at("session_id").is_string()) return error(400, "\"session_id\" must be a string");
      session = req.at("session_id").get<std::string>();
    }

    ImageRef image;
    const auto& img = req.at("image");
    if (img.is_string()) {
      const auto path = resolve_image(img.get<std::string>());
      if (!path) return error(404, "unknown image \"" + img.get<std::string>() + "\"");
      image = ImageRef::from_path(*path, img.get<std::string>());
    } else {
      try {
        image = wire::decode_image(img);
        if (img.contains("id") && img.at("id").is_string()) image.id = img.at("id").get<std::string>();
      } catch (const Error& e) {
        return error(400, e.what());
      }
    }

    try {
      AnswerRecord rec = pipeline_->answer(image, req.at("question").get<std::string>());
      nlohmann::json body = to_json(rec);
      if (session) {
        body["session_id"] = *session;
        body["timestamp_us"] = sessions_.append(*session, std::move(rec));
      }
      return {200, std::move(body)};
    } catch (const Error& e) {
      return {502, {{"error", e.what()}, {"stage", to_string(e.stage())}, {"code", to_string(e.code())}}};
    }
  }

  Reply submit_evaluation(const nlohmann::json& req) {
    if (!req.is_object()) return error(400, "evaluate needs a JSON object");
    std::vector<EvalItem> items;
    try {
      if (req.contains("dataset") && req.at("dataset").is_string()) {
        std::filesystem::path path(req.at("dataset").get<std::string>());
        if (path.is_relative()) path = options_.image_root / path;
        items = load_dataset_file(path);
      } else if (req.contains("items")) {
        items = load_dataset(nlohmann::json{{"items", req.at("items")}}, options_.image_root);
      } else {
        return error(400, "evaluate needs \"dataset\" (path) or \"items\"");
      }
    } catch (const Error& e) {
      return error(400, e.what());
    }
    std::size_t parallelism = options_.parallelism;
    if (req.contains("parallelism") && req.at("parallelism").is_number_unsigned()) {
      parallelism = std::max<std::size_t>(1, req.at("parallelism").get<std::size_t>());
    }
    const std::string id = jobs_.submit(pipeline_, std::move(items), parallelism);
    return {202, {{"job_id", id}}};
  }

  Reply job(const std::string& id) const {
    auto status = jobs_.status(id);
    if (!status) return error(404, "unknown job \"" + id + "\"");
    return {200, *status};
  }

  Reply cancel_job(const std::string& id) {
    if (!jobs_.cancel(id)) return error(404, "unknown job \"" + id + "\"");
    return job(id);
  }

  Reply session(const std::string& id) const {
    auto log = sessions_.get(id);
    if (!log) return error(404, "unknown session \"" + id + "\"");
    return {200, session_to_json(id, *log)};
  }

  Reply replay_session(const std::string& id) const {
    auto log = sessions_.get(id);
    if (!log) return error(404, "unknown session \"" + id + "\"");
    nlohmann::json results = nlohmann::json::array();
    std::size_t reproduced = 0;
    for (const auto& entry : *log) {
      nlohmann::json r{{"question", entry.record.question_raw},
                       {"logged_final_answer", entry.record.final_answer}};
      try {
        const AnswerRecord again = pipeline_->answer(entry.record.image, entry.record.question_raw);
        r["replayed_final_answer"] = again.final_answer;
        r["reproduced"] = again.final_answer == entry.record.final_answer;
      } catch (const Error& e) {
        r["replayed_final_answer"] = nullptr;
        r["reproduced"] = false;
        r["error"] = e.what();
      }
      if (r["reproduced"].get<bool>()) ++reproduced;
      results.push_back(std::move(r));
    }
    return {200, {{"session_id", id}, {"total", log->size()}, {"reproduced", reproduced}, {"results", results}}};
  }

 private:
  static Reply error(int status, const std::string& message) { return {status, {{"error", message}}}; }

  static void send(httplib::Response& res, const Reply& r) { wire::reply_json(res, r.status, r.body); }

  static std::optional<nlohmann::json> body_of(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) {
      send(res, error(400, "request body is not valid JSON"));
      return std::nullopt;
    }
    return j;
  }

  void install_routes() {
    using Req = const httplib::Request&;
    using Res = httplib::Response&;
    server_.Get("/api/health", [this](Req, Res res) { send(res, health()); });
    server_.Get("/api/bank", [this](Req, Res res) { send(res, bank()); });
    server_.Get("/api/images", [this](Req, Res res) { send(res, images()); });
    server_.Get("/api/images/(.+)", [this](Req req, Res res) {
      const auto path = resolve_image(req.matches[1]);
      if (!path) return send(res, error(404, "unknown image"));
      res.set_content(read_file_bytes(*path), media_type_for(*path));
    });
    server_.Post("/api/ask", [this](Req req, Res res) {
      if (auto body = body_of(req, res)) send(res, ask(*body));
    });
    server_.Post("/api/evaluate", [this](Req req, Res res) {
      if (auto body = body_of(req, res)) send(res, submit_evaluation(*body));
    });
    server_.Get("/api/jobs/([^/]+)", [this](Req req, Res res) { send(res, job(req.matches[1])); });
    server_.Post("/api/jobs/([^/]+)/cancel", [this](Req req, Res res) { send(res, cancel_job(req.matches[1])); });
    server_.Delete("/api/jobs/([^/]+)", [this](Req req, Res res) { send(res, cancel_job(req.matches[1])); });
    server_.Get("/api/sessions/([^/]+)", [this](Req req, Res res) { send(res, session(req.matches[1])); });
    server_.Post("/api/sessions/([^/]+)/replay", [this](Req req, Res res) {
      send(res, replay_session(req.matches[1]));
    });
    if (options_.static_dir) server_.set_mount_point("/", options_.static_dir->string());
  }

  ServiceOptions options_;
  std::shared_ptr<Pipeline> pipeline_;
  SessionStore sessions_;
  JobManager jobs_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

// Validates `config`, loads the bank, health-checks both backends and binds.
// Health failures are warnings unless config.strict. The caller starts
// serving with listen() or start().
inline std::unique_ptr<Service> serve(const ServiceConfig& config, std::ostream& log) {
  config.validate();
  auto bank = std::make_shared<const QuestionBank>(QuestionBank::load(config.bank_path));
  auto generator = std::make_shared<const wire::HttpGenerator>(config.generator);
  auto embedder = std::make_shared<const wire::HttpEmbedder>(config.embedder);

  auto probe = [&](const char* role, const std::string& url, const auto& backend) {
    try {
      log << role << " " << url << " ok (model: " << backend.health() << ")\n";
    } catch (const Error& e) {
      if (config.strict) throw Error(e.code(), std::string(role) + " backend " + url + " is unreachable: " + e.what());
      log << "warning: " << role << " backend " << url << " failed its health check: " << e.what() << '\n';
    }
  };
  probe("generator", config.generator.base_url, *generator);
  probe("embedder", config.embedder.base_url, *embedder);

  ServiceOptions options{config.image_root, config.cache_capacity, config.parallelism, config.static_dir};
  auto service = std::make_unique<Service>(std::move(bank), std::move(generator), std::move(embedder), options);
  service->bind(config.listen_address, config.port);
  log << "zeshot listening on http://" << config.listen_address << ":" << service->port() << '\n';
  return service;
}

}  // namespace zeshot
