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

// zeshot command line.
//
//   zeshot ask --image <path> --question <text> --bank <path>
//              --generator-url <url> --embedder-url <url> [--verbose]
//   zeshot eval --dataset <path> --out <path> --format json|table-text|csv
//               (--config <path> | --bank <path> backend flags)
//   zeshot serve --config <path>
//   zeshot mock-backends --port <p> [--script <path>]
//   zeshot conformance --generator-url <url> --embedder-url <url>
//   zeshot convert-floodnet --annotations <path> --bank <path> --out <path>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zeshot/conformance.hpp"
#include "zeshot/evaluation.hpp"
#include "zeshot/floodnet.hpp"
#include "zeshot/pipeline.hpp"
#include "zeshot/service.hpp"
#include "zeshot/wire.hpp"

namespace {

struct BackendFlags {
  std::string generator_url;
  std::string embedder_url;
  int timeout_ms = 30000;
  std::string auth_token;
  std::string mock_script;  // in-process mocks instead of remote backends

  void add_to(CLI::App* app) {
    app->add_option("--generator-url", generator_url, "Answer generator base URL");
    app->add_option("--embedder-url", embedder_url, "Text embedder base URL");
    app->add_option("--timeout-ms", timeout_ms, "Backend timeout in milliseconds")->check(CLI::PositiveNumber);
    app->add_option("--auth-token", auth_token, "Bearer token sent to both backends");
    app->add_option("--mock-script", mock_script,
                    "Use the in-process mock generator with this script and the mock embedder")
        ->check(CLI::ExistingFile);
  }

  zeshot::BackendEndpoint endpoint(const std::string& url, zeshot::BackendKind kind) const {
    zeshot::BackendEndpoint e{url, kind, timeout_ms, std::nullopt};
    if (!auth_token.empty()) e.auth_token = auth_token;
    return e;
  }

  std::pair<std::shared_ptr<const zeshot::Generator>, std::shared_ptr<const zeshot::Embedder>> build() const {
    if (!mock_script.empty()) {
      return {std::make_shared<const zeshot::MockGenerator>(zeshot::MockGenerator::load(mock_script)),
              std::make_shared<const zeshot::MockEmbedder>()};
    }
    if (generator_url.empty() || embedder_url.empty()) {
      throw zeshot::Error(zeshot::Errc::validation,
                          "--generator-url and --embedder-url are required (or --mock-script)");
    }
    return {std::make_shared<const zeshot::wire::HttpGenerator>(endpoint(generator_url, zeshot::BackendKind::generator)),
            std::make_shared<const zeshot::wire::HttpEmbedder>(endpoint(embedder_url, zeshot::BackendKind::embedder))};
  }
};

void print_trace(const zeshot::AnswerRecord& r, std::ostream& out) {
  auto row = [&](const char* label, const std::string& value) {
    out << std::left << std::setw(20) << label << value << '\n';
  };
  row("image:", r.image.id);
  row("question:", r.question_raw);
  if (r.question_entry) {
    row("bank entry:", std::string(zeshot::to_label(r.question_entry->category)) + " (" +
                           std::string(zeshot::to_label(r.question_entry->mode)) + ")");
  } else {
    row("bank entry:", "none (question not in bank)");
  }
  row("modified question:", r.modified_question);
  row("raw answer:", r.raw_answer);
  if (r.match && r.question_entry) {
    row("reference query:", r.match->reference_query);
    out << "candidates:\n";
    for (std::size_t i = 0; i < r.match->scores.size(); ++i) {
      out << "  " << (i == r.match->selected_index ? "* " : "  ") << std::left << std::setw(24)
          << r.question_entry->answers[i] << std::fixed << std::setprecision(6) << r.match->scores[i]
          << '\n';
    }
    out.unsetf(std::ios::fixed);
  }
  row("final answer:", r.final_answer + "  [" + std::string(zeshot::to_label(r.mode_applied)) + "]");
  std::ostringstream t;
  t << std::fixed << std::setprecision(2) << "lookup " << r.timings.lookup_ms << "  generation "
    << r.timings.generation_ms << "  matching " << r.timings.matching_ms << "  total " << r.timings.total_ms;
  row("timings (ms):", t.str());
}

// Blocks SIGINT/SIGTERM on all threads created after this call; the caller
// waits for them with wait_for_shutdown_signal().
sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_shutdown_signal(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw zeshot::Error(zeshot::Errc::io, "cannot write " + path);
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot visual question answering with answer mapping"};
  app.require_subcommand(1);

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question about one image");
  std::string ask_image, ask_question, ask_bank;
  bool verbose = false, as_json = false;
  BackendFlags ask_backends;
  ask->add_option("--image", ask_image, "Image path or http(s) URL")->required();
  ask->add_option("--question", ask_question, "Question text")->required();
  ask->add_option("--bank", ask_bank, "Question bank JSON")->required()->check(CLI::ExistingFile);
  ask->add_flag("--verbose,-v", verbose, "Print the full stage-by-stage trace");
  ask->add_flag("--json", as_json, "Print the AnswerRecord as JSON");
  ask_backends.add_to(ask);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a dataset and write a per-category report");
  std::string eval_dataset, eval_out = "-", eval_format = "table-text", eval_config, eval_bank;
  std::size_t eval_parallelism = 4, eval_cache = 4096;
  BackendFlags eval_backends;
  eval->add_option("--dataset", eval_dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "Report path, - for stdout");
  eval->add_option("--format", eval_format, "Report format")
      ->check(CLI::IsMember({"json", "table-text", "csv"}));
  eval->add_option("--config", eval_config, "Service config supplying bank and backends")
      ->check(CLI::ExistingFile);
  eval->add_option("--bank", eval_bank, "Question bank JSON")->check(CLI::ExistingFile);
  eval->add_option("--parallelism", eval_parallelism, "Concurrent items")->check(CLI::PositiveNumber);
  eval->add_option("--cache-capacity", eval_cache, "Embedding cache entries, 0 disables");
  eval_backends.add_to(eval);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  serve->add_option("--config", serve_config, "Service config JSON")->required()->check(CLI::ExistingFile);

  // mock-backends
  auto* mocks = app.add_subcommand("mock-backends", "Serve the in-process mocks over the wire protocol");
  std::string mock_host = "127.0.0.1", mock_script, mock_default = "unknown", mock_token;
  int mock_port = 0;
  mocks->add_option("--port", mock_port, "Port, 0 for any free port")->required()->check(CLI::Range(0, 65535));
  mocks->add_option("--host", mock_host, "Listen address");
  mocks->add_option("--script", mock_script, "Mock generator script JSON")->check(CLI::ExistingFile);
  auto* mock_default_opt =
      mocks->add_option("--default-answer", mock_default, "Answer for unscripted questions (default: unknown)");
  mocks->add_option("--auth-token", mock_token, "Require this bearer token");

  // conformance
  auto* conf = app.add_subcommand("conformance", "Run the wire-protocol suite against backends");
  BackendFlags conf_backends;
  conf->add_option("--generator-url", conf_backends.generator_url, "Generator base URL")->required();
  conf->add_option("--embedder-url", conf_backends.embedder_url, "Embedder base URL")->required();
  conf->add_option("--auth-token", conf_backends.auth_token, "Bearer token");
  conf->add_option("--timeout-ms", conf_backends.timeout_ms, "Timeout in milliseconds");

  // convert-floodnet
  auto* convert = app.add_subcommand("convert-floodnet", "Convert FloodNet VQA annotations to a dataset");
  std::string conv_in, conv_bank, conv_out = "-", conv_prefix;
  convert->add_option("--annotations", conv_in, "FloodNet question JSON")->required()->check(CLI::ExistingFile);
  convert->add_option("--bank", conv_bank, "Question bank JSON")->required()->check(CLI::ExistingFile);
  convert->add_option("--out", conv_out, "Dataset path, - for stdout");
  convert->add_option("--image-prefix", conv_prefix, "Prefix prepended to each Image_ID");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ask) {
      auto bank = std::make_shared<const zeshot::QuestionBank>(zeshot::QuestionBank::load(ask_bank));
      auto [generator, embedder] = ask_backends.build();
      const zeshot::Pipeline pipeline(bank, generator, embedder);
      const auto record = pipeline.answer(zeshot::ImageRef::from_locator(ask_image), ask_question);
      if (as_json) {
        std::cout << zeshot::to_json(record).dump(2) << '\n';
      } else if (verbose) {
        print_trace(record, std::cout);
      } else {
        std::cout << record.final_answer << '\n';
      }
      return 0;
    }

    if (*eval) {
      std::shared_ptr<const zeshot::QuestionBank> bank;
      std::shared_ptr<const zeshot::Generator> generator;
      std::shared_ptr<const zeshot::Embedder> embedder;
      if (!eval_config.empty()) {
        const auto config = zeshot::ServiceConfig::load(eval_config);
        bank = std::make_shared<const zeshot::QuestionBank>(zeshot::QuestionBank::load(config.bank_path));
        generator = std::make_shared<const zeshot::wire::HttpGenerator>(config.generator);
        embedder = std::make_shared<const zeshot::wire::HttpEmbedder>(config.embedder);
      } else {
        if (eval_bank.empty()) throw zeshot::Error(zeshot::Errc::validation, "--bank or --config is required");
        bank = std::make_shared<const zeshot::QuestionBank>(zeshot::QuestionBank::load(eval_bank));
        std::tie(generator, embedder) = eval_backends.build();
      }
      const zeshot::Pipeline pipeline(bank, generator, embedder, eval_cache);
      const auto items = zeshot::load_dataset_file(eval_dataset);
      zeshot::EvalOptions options;
      options.parallelism = eval_parallelism;
      const auto report = zeshot::evaluate(pipeline, items, options);
      write_output(eval_out, zeshot::emit_report(report, zeshot::parse_report_format(eval_format)));
      if (report.error_count > 0) {
        std::cerr << report.error_count << " of " << items.size() << " items failed; scored as incorrect\n";
      }
      return 0;
    }

    if (*serve) {
      const sigset_t signals = block_shutdown_signals();
      auto service = zeshot::serve(zeshot::ServiceConfig::load(serve_config), std::cerr);
      service->start();
      wait_for_shutdown_signal(signals);
      std::cerr << "shutting down\n";
      service->stop();
      return 0;
    }

    if (*mocks) {
      const sigset_t signals = block_shutdown_signals();
      auto generator = std::make_shared<zeshot::MockGenerator>(
          mock_script.empty() ? zeshot::MockGenerator() : zeshot::MockGenerator::load(mock_script));
      if (mock_script.empty() || mock_default_opt->count() > 0) generator->set_default(mock_default);
      std::optional<std::string> token;
      if (!mock_token.empty()) token = mock_token;
      zeshot::wire::BackendServer server(generator, std::make_shared<zeshot::MockEmbedder>(), "mock", token);
      const int port = server.bind(mock_host, mock_port);
      std::cout << "listening on http://" << mock_host << ":" << port << std::endl;
      server.start();
      wait_for_shutdown_signal(signals);
      server.stop();
      return 0;
    }

    if (*conf) {
      const auto checks = zeshot::conformance::run(
          conf_backends.endpoint(conf_backends.generator_url, zeshot::BackendKind::generator),
          conf_backends.endpoint(conf_backends.embedder_url, zeshot::BackendKind::embedder));
      for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name;
        if (!c.passed) std::cout << ": " << c.detail;
        std::cout << '\n';
      }
      return zeshot::conformance::all_passed(checks) ? 0 : 1;
    }

    if (*convert) {
      std::ifstream in(conv_in);
      const auto annotations = nlohmann::json::parse(in, nullptr, false);
      if (annotations.is_discarded()) throw zeshot::Error(zeshot::Errc::parse, conv_in + " is not valid JSON");
      const auto conversion =
          zeshot::floodnet::convert(annotations, zeshot::QuestionBank::load(conv_bank), conv_prefix);
      write_output(conv_out, conversion.dataset.dump(2) + "\n");
      std::cerr << "converted " << conversion.converted << " records, skipped " << conversion.skipped.size() << '\n';
      for (const auto& reason : conversion.skipped) std::cerr << "  skipped " << reason << '\n';
      return 0;
    }
  } catch (const zeshot::Error& e) {
    std::cerr << "error";
    if (e.stage() != zeshot::Stage::none) std::cerr << " (" << zeshot::to_string(e.stage()) << ")";
    std::cerr << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
