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

// Question bank: the dictionary of unique questions, their category, answer
// mode and ordered candidate answers, plus prompt modification.
//
// Document layout:
//
//   {"questions": [{"question": "...", "category": "road-condition",
//                   "mode": "constrained", "answers": ["yes", "no"]}]}

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "zeshot/error.hpp"
#include "zeshot/text.hpp"

namespace zeshot {

// Declared in report row order.
enum class QuestionCategory {
  building_condition,
  complex_counting,
  density_estimation,
  entire_condition,
  risk_assessment,
  road_condition,
  simple_counting,
};

inline constexpr std::array<QuestionCategory, 7> kAllCategories{
    QuestionCategory::building_condition, QuestionCategory::complex_counting,
    QuestionCategory::density_estimation, QuestionCategory::entire_condition,
    QuestionCategory::risk_assessment,    QuestionCategory::road_condition,
    QuestionCategory::simple_counting,
};

inline std::string_view to_label(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::building_condition: return "building-condition";
    case QuestionCategory::complex_counting: return "complex-counting";
    case QuestionCategory::density_estimation: return "density-estimation";
    case QuestionCategory::entire_condition: return "entire-condition";
    case QuestionCategory::risk_assessment: return "risk-assessment";
    case QuestionCategory::road_condition: return "road-condition";
    case QuestionCategory::simple_counting: return "simple-counting";
  }
  return "";
}

inline std::string_view display_name(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::building_condition: return "Building Condition";
    case QuestionCategory::complex_counting: return "Complex Counting";
    case QuestionCategory::density_estimation: return "Density Estimation";
    case QuestionCategory::entire_condition: return "Entire Condition";
    case QuestionCategory::risk_assessment: return "Risk Assessment";
    case QuestionCategory::road_condition: return "Road Condition";
    case QuestionCategory::simple_counting: return "Simple Counting";
  }
  return "";
}

inline QuestionCategory parse_category(std::string_view label) {
  for (QuestionCategory c : kAllCategories) {
    if (to_label(c) == label) return c;
  }
  throw Error(Errc::unknown_category, "unknown category \"" + std::string(label) + "\"");
}

inline bool is_counting(QuestionCategory c) {
  return c == QuestionCategory::complex_counting || c == QuestionCategory::simple_counting;
}

// constrained: candidates appended to the prompt and the raw answer mapped.
// open: prompt unchanged and the raw answer passed through.
enum class AnswerMode { constrained, open };

inline std::string_view to_label(AnswerMode m) {
  return m == AnswerMode::constrained ? "constrained" : "open";
}

inline AnswerMode parse_answer_mode(std::string_view label) {
  if (label == "constrained") return AnswerMode::constrained;
  if (label == "open") return AnswerMode::open;
  throw Error(Errc::parse, "unknown answer mode \"" + std::string(label) + "\"");
}

struct QuestionEntry {
  std::string question_text;
  QuestionCategory category = QuestionCategory::entire_condition;
  AnswerMode mode = AnswerMode::constrained;
  std::vector<std::string> answers;  // bank order; empty iff mode == open

  bool operator==(const QuestionEntry&) const = default;
};

inline nlohmann::json to_json(const QuestionEntry& e) {
  return {{"question", e.question_text},
          {"category", to_label(e.category)},
          {"mode", to_label(e.mode)},
          {"answers", e.answers}};
}

// Checks every QuestionEntry invariant. Throws Error(validation).
inline void validate(const QuestionEntry& e) {
  const std::string key = text::normalize_question(e.question_text);
  if (key.empty()) throw Error(Errc::validation, "question text is empty");
  if (is_counting(e.category) != (e.mode == AnswerMode::open)) {
    throw Error(Errc::validation, "\"" + e.question_text + "\": category " +
                                      std::string(to_label(e.category)) + " requires mode " +
                                      (is_counting(e.category) ? "open" : "constrained"));
  }
  if (e.mode == AnswerMode::open) {
    if (!e.answers.empty()) {
      throw Error(Errc::validation,
                  "\"" + e.question_text + "\": open (counting) entries take no candidates");
    }
    return;
  }
  std::set<std::string> distinct;
  for (const auto& a : e.answers) {
    std::string norm = text::normalize_answer(a);
    if (norm.empty()) {
      throw Error(Errc::validation, "\"" + e.question_text + "\": empty candidate answer");
    }
    if (!distinct.insert(std::move(norm)).second) {
      throw Error(Errc::validation,
                  "\"" + e.question_text + "\": duplicate candidate \"" + a + "\"");
    }
  }
  if (distinct.size() < 2) {
    throw Error(Errc::validation,
                "\"" + e.question_text + "\": constrained entries need at least 2 candidates");
  }
}

inline QuestionEntry entry_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::parse, "question entry must be an object");
  try {
    QuestionEntry e;
    e.question_text = j.at("question").get<std::string>();
    e.category = parse_category(j.at("category").get<std::string>());
    e.mode = parse_answer_mode(j.at("mode").get<std::string>());
    if (j.contains("answers")) e.answers = j.at("answers").get<std::vector<std::string>>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::parse, std::string("malformed question entry: ") + ex.what());
  }
}

class QuestionBank {
 public:
  QuestionBank() = default;

  static QuestionBank from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("questions") || !doc.at("questions").is_array()) {
      throw Error(Errc::parse, "question bank must be an object with a \"questions\" array");
    }
    QuestionBank bank;
    for (const auto& item : doc.at("questions")) bank.add(entry_from_json(item));
    return bank;
  }

  static QuestionBank parse(std::string_view document) {
    nlohmann::json doc = nlohmann::json::parse(document, nullptr, false);
    if (doc.is_discarded()) throw Error(Errc::parse, "question bank is not valid JSON");
    return from_json(doc);
  }

  static QuestionBank load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open question bank " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return parse(buf.str());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
  }

  // Canonical document; from_json(to_json()) reproduces the bank.
  nlohmann::json to_json() const {
    nlohmann::json questions = nlohmann::json::array();
    for (const auto& e : entries_) questions.push_back(zeshot::to_json(e));
    return {{"questions", std::move(questions)}};
  }

  // Exact match on the normalized form. Throws UnknownQuestionError.
  const QuestionEntry& lookup(std::string_view question) const {
    std::string key = text::normalize_question(question);
    auto it = index_.find(key);
    if (it == index_.end()) throw UnknownQuestionError(std::move(key));
    return entries_[it->second];
  }

  const QuestionEntry* find(std::string_view question) const {
    auto it = index_.find(text::normalize_question(question));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<QuestionEntry>& entries() const { return entries_; }

  bool operator==(const QuestionBank& other) const { return entries_ == other.entries_; }

  void add(QuestionEntry entry) {
    validate(entry);
    std::string key = text::normalize_question(entry.question_text);
    if (index_.count(key) != 0) {
      throw Error(Errc::duplicate_question, "duplicate question \"" + key + "\"");
    }
    index_.emplace(std::move(key), entries_.size());
    entries_.push_back(std::move(entry));
  }

 private:
  std::vector<QuestionEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Constrained entries: "<question> <a1>, <a2>, ..., <aM>". Open entries:
// the question text unchanged.
inline std::string modify_prompt(const QuestionEntry& entry) {
  if (entry.mode == AnswerMode::open || entry.answers.empty()) return entry.question_text;
  std::string out = entry.question_text;
  out.push_back(' ');
  for (std::size_t i = 0; i < entry.answers.size(); ++i) {
    if (i > 0) out.append(", ");
    out.append(entry.answers[i]);
  }
  return out;
}

}  // namespace zeshot
