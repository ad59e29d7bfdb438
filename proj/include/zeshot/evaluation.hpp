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

// Per-category accuracy evaluation. Every item is scored twice: once on the
// pipeline's final answer ("mapped") and once on the normalized raw
// generator output ("raw"), so the effect of answer mapping is visible on
// any dataset.
//
// Dataset layout:
//
//   {"items": [{"image": "img/10165.jpg", "question": "...",
//               "ground_truth": "flooded", "category": "entire-condition"}]}

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"
#include "zeshot/pipeline.hpp"
#include "zeshot/question_bank.hpp"
#include "zeshot/text.hpp"

namespace zeshot {

struct EvalItem {
  ImageRef image;
  std::string question;
  std::string ground_truth;
  QuestionCategory category = QuestionCategory::entire_condition;
};

// Relative image paths resolve against `base_dir`.
inline std::vector<EvalItem> load_dataset(const nlohmann::json& doc,
                                          const std::filesystem::path& base_dir = {}) {
  if (!doc.is_object() || !doc.contains("items") || !doc.at("items").is_array()) {
    throw Error(Errc::parse, "dataset must be an object with an \"items\" array");
  }
  std::vector<EvalItem> items;
  items.reserve(doc.at("items").size());
  std::size_t index = 0;
  for (const auto& j : doc.at("items")) {
    const std::string where = "dataset item " + std::to_string(index++);
    if (!j.is_object()) throw Error(Errc::parse, where + " is not an object");
    auto str = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(Errc::parse, where + " has no string \"" + key + "\"");
      }
      return j.at(key).get<std::string>();
    };
    const std::string image = str("image");
    if (text::trim(image).empty()) throw Error(Errc::validation, where + " has an empty image reference");
    EvalItem item;
    item.image = ImageRef::from_locator(image, base_dir);
    item.question = str("question");
    item.ground_truth = str("ground_truth");
    if (text::trim(item.ground_truth).empty()) {
      throw Error(Errc::validation, where + " has an empty ground truth");
    }
    try {
      item.category = parse_category(str("category"));
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    items.push_back(std::move(item));
  }
  return items;
}

inline std::vector<EvalItem> load_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open dataset " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::parse, path.string() + " is not valid JSON");
  return load_dataset(doc, path.parent_path());
}

// Exact match after normalization. Numeric ground truths also map digit
// words ("four" == "4").
inline bool answers_equal(std::string_view predicted, std::string_view ground_truth) {
  std::string p = text::normalize_answer(predicted);
  std::string g = text::normalize_answer(ground_truth);
  if (text::is_numeric(text::map_digit_words(g))) {
    p = text::map_digit_words(p);
    g = text::map_digit_words(g);
  }
  return p == g;
}

struct CategoryTally {
  std::size_t count = 0;
  std::size_t correct_mapped = 0;
  std::size_t correct_raw = 0;

  double accuracy_mapped() const { return count == 0 ? 0.0 : 100.0 * correct_mapped / count; }
  double accuracy_raw() const { return count == 0 ? 0.0 : 100.0 * correct_raw / count; }

  bool operator==(const CategoryTally&) const = default;
};

struct ItemOutcome {
  std::size_t index = 0;
  std::string image_id;
  std::string question;
  QuestionCategory category = QuestionCategory::entire_condition;
  std::string ground_truth;
  std::string final_answer;
  std::string raw_answer;
  std::optional<ModeApplied> mode_applied;  // absent when the item errored
  bool correct_mapped = false;
  bool correct_raw = false;
  std::string error;  // "<stage>: <message>" on backend failure

  bool operator==(const ItemOutcome&) const = default;
};

struct EvalReport {
  std::map<QuestionCategory, CategoryTally> per_category;  // only non-empty categories
  CategoryTally overall;
  std::vector<ItemOutcome> items;  // input order
  std::size_t error_count = 0;

  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  std::size_t parallelism = 1;
  // Called after each item with (done, total). May run on worker threads.
  std::function<void(std::size_t, std::size_t)> on_progress;
  // Checked between items; when set, evaluate throws Error(cancelled).
  const std::atomic<bool>* cancel = nullptr;
};

inline ItemOutcome evaluate_item(const Pipeline& pipeline, const EvalItem& item, std::size_t index) {
  ItemOutcome out;
  out.index = index;
  out.image_id = item.image.id;
  out.question = item.question;
  out.category = item.category;
  out.ground_truth = item.ground_truth;
  try {
    const AnswerRecord rec = pipeline.answer(item.image, item.question);
    const bool counting = rec.mode_applied == ModeApplied::passthrough;
    out.final_answer = rec.final_answer;
    out.raw_answer = rec.raw_answer;
    out.mode_applied = rec.mode_applied;
    out.correct_mapped = answers_equal(rec.final_answer, item.ground_truth);
    out.correct_raw = answers_equal(normalize_raw_answer(rec.raw_answer, counting), item.ground_truth);
  } catch (const Error& e) {
    out.error = std::string(to_string(e.stage())) + ": " + e.what();
  }
  return out;
}

inline EvalReport aggregate(std::vector<ItemOutcome> outcomes) {
  EvalReport report;
  for (const auto& o : outcomes) {
    for (CategoryTally* t : {&report.per_category[o.category], &report.overall}) {
      ++t->count;
      t->correct_mapped += o.correct_mapped ? 1 : 0;
      t->correct_raw += o.correct_raw ? 1 : 0;
    }
    if (!o.error.empty()) ++report.error_count;
  }
  report.items = std::move(outcomes);
  return report;
}

// Backend failures score as incorrect and are counted in error_count; they
// never abort the run.
inline EvalReport evaluate(const Pipeline& pipeline, std::span<const EvalItem> items,
                           const EvalOptions& options = {}) {
  std::vector<ItemOutcome> outcomes(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto cancelled = [&] { return options.cancel != nullptr && options.cancel->load(); };

  auto worker = [&] {
    for (std::size_t i = next++; i < items.size() && !cancelled(); i = next++) {
      outcomes[i] = evaluate_item(pipeline, items[i], i);
      const std::size_t finished = ++done;
      if (options.on_progress) options.on_progress(finished, items.size());
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(items.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (cancelled()) throw Error(Errc::cancelled, "evaluation cancelled");
  return aggregate(std::move(outcomes));
}

enum class ReportFormat { json, table_text, csv };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "table-text") return ReportFormat::table_text;
  if (s == "csv") return ReportFormat::csv;
  throw Error(Errc::parse, "unknown report format \"" + std::string(s) + "\"");
}

inline nlohmann::json to_json(const CategoryTally& t) {
  return {{"count", t.count},
          {"correct_mapped", t.correct_mapped},
          {"correct_raw", t.correct_raw},
          {"accuracy_mapped", t.accuracy_mapped()},
          {"accuracy_raw", t.accuracy_raw()}};
}

inline nlohmann::json to_json(const ItemOutcome& o) {
  return {{"index", o.index},
          {"image", o.image_id},
          {"question", o.question},
          {"category", to_label(o.category)},
          {"ground_truth", o.ground_truth},
          {"final_answer", o.final_answer},
          {"raw_answer", o.raw_answer},
          {"mode_applied", o.mode_applied ? nlohmann::json(to_label(*o.mode_applied)) : nlohmann::json()},
          {"correct_mapped", o.correct_mapped},
          {"correct_raw", o.correct_raw},
          {"error", o.error.empty() ? nlohmann::json() : nlohmann::json(o.error)}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_category = nlohmann::json::object();
  for (const auto& [cat, tally] : r.per_category) per_category[std::string(to_label(cat))] = to_json(tally);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& o : r.items) items.push_back(to_json(o));
  return {{"per_category", std::move(per_category)},
          {"overall", to_json(r.overall)},
          {"error_count", r.error_count},
          {"items", std::move(items)}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    auto tally = [](const nlohmann::json& t) {
      return CategoryTally{t.at("count").get<std::size_t>(), t.at("correct_mapped").get<std::size_t>(),
                           t.at("correct_raw").get<std::size_t>()};
    };
    EvalReport r;
    for (const auto& [label, t] : j.at("per_category").items()) {
      r.per_category[parse_category(label)] = tally(t);
    }
    r.overall = tally(j.at("overall"));
    r.error_count = j.at("error_count").get<std::size_t>();
    for (const auto& o : j.at("items")) {
      ItemOutcome out;
      out.index = o.at("index").get<std::size_t>();
      out.image_id = o.at("image").get<std::string>();
      out.question = o.at("question").get<std::string>();
      out.category = parse_category(o.at("category").get<std::string>());
      out.ground_truth = o.at("ground_truth").get<std::string>();
      out.final_answer = o.at("final_answer").get<std::string>();
      out.raw_answer = o.at("raw_answer").get<std::string>();
      if (!o.at("mode_applied").is_null()) {
        out.mode_applied = parse_mode_applied(o.at("mode_applied").get<std::string>());
      }
      out.correct_mapped = o.at("correct_mapped").get<bool>();
      out.correct_raw = o.at("correct_raw").get<bool>();
      if (!o.at("error").is_null()) out.error = o.at("error").get<std::string>();
      r.items.push_back(std::move(out));
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse, std::string("malformed report: ") + ex.what());
  }
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() < width ? std::string(width - s.size(), ' ') + s : s;
}

}  // namespace detail

// table-text and csv list categories in category declaration order, omitting empty ones.
inline std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json:
      out << to_json(report).dump(2) << '\n';
      break;
    case ReportFormat::table_text:
      out << detail::pad_right("Question Type", 20) << detail::pad_left("Count", 7)
          << detail::pad_left("Raw (%)", 10) << detail::pad_left("Mapped (%)", 12) << '\n';
      for (QuestionCategory c : kAllCategories) {
        auto it = report.per_category.find(c);
        if (it == report.per_category.end()) continue;
        out << detail::pad_right(std::string(display_name(c)), 20)
            << detail::pad_left(std::to_string(it->second.count), 7)
            << detail::pad_left(detail::fixed2(it->second.accuracy_raw()), 10)
            << detail::pad_left(detail::fixed2(it->second.accuracy_mapped()), 12) << '\n';
      }
      break;
    case ReportFormat::csv:
      out << "category,count,correct_raw,correct_mapped,accuracy_raw,accuracy_mapped\n";
      for (QuestionCategory c : kAllCategories) {
        auto it = report.per_category.find(c);
        if (it == report.per_category.end()) continue;
        const auto& t = it->second;
        out << to_label(c) << ',' << t.count << ',' << t.correct_raw << ',' << t.correct_mapped << ','
            << detail::fixed2(t.accuracy_raw()) << ',' << detail::fixed2(t.accuracy_mapped()) << '\n';
      }
      break;
  }
  return out.str();
}

}  // namespace zeshot
