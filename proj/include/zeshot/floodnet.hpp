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

// Best-effort converter from the published FloodNet VQA annotation layout
// to the canonical dataset document.
//
// Accepted input: an object keyed by question id, or an array, of records
//
//   {"Image_ID": "10165.JPG", "Question": "...", "Ground_Truth": "...",
//    "Question_Type": "Condition_Recognition"}
//
// The published question types are coarser than the seven evaluation
// categories, so the category comes from the question bank first and from
// the question type only when the bank has no entry. Ground truths of
// constrained questions are snapped onto the bank spelling when they differ
// only by '-', '_' or spacing ("non flooded" -> "non-flooded").

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zeshot/error.hpp"
#include "zeshot/question_bank.hpp"
#include "zeshot/text.hpp"

namespace zeshot::floodnet {

inline constexpr std::string_view kAdapterVersion = "floodnet-vqa/1";

struct Conversion {
  nlohmann::json dataset;  // {"items": [...], "source_format": kAdapterVersion}
  std::size_t converted = 0;
  std::vector<std::string> skipped;  // one reason per dropped record
};

// Lowercase with '-', '_' and whitespace runs folded to one space.
inline std::string fold_separators(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c == '-' || c == '_') c = ' ';
  }
  return text::normalize_answer(out);
}

inline std::optional<QuestionCategory> category_from_type(std::string_view type) {
  const std::string folded = fold_separators(type);
  for (QuestionCategory c : kAllCategories) {
    if (fold_separators(to_label(c)) == folded) return c;
  }
  return std::nullopt;
}

inline Conversion convert(const nlohmann::json& annotations, const QuestionBank& bank,
                          const std::string& image_prefix = {}) {
  if (!annotations.is_object() && !annotations.is_array()) {
    throw Error(Errc::parse, "FloodNet annotations must be an object or an array");
  }
  Conversion out;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& [key, rec] : annotations.items()) {
    auto field = [&](const char* name) -> std::optional<std::string> {
      if (!rec.is_object() || !rec.contains(name) || !rec.at(name).is_primitive() ||
          rec.at(name).is_null()) {
        return std::nullopt;
      }
      const auto& v = rec.at(name);
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    const auto image = field("Image_ID");
    const auto question = field("Question");
    const auto truth = field("Ground_Truth");
    if (!image || !question || !truth || text::trim(*truth).empty()) {
      out.skipped.push_back(key + ": missing Image_ID, Question or Ground_Truth");
      continue;
    }

    std::optional<QuestionCategory> category;
    std::string ground_truth = *truth;
    if (const QuestionEntry* entry = bank.find(*question)) {
      category = entry->category;
      for (const auto& candidate : entry->answers) {
        if (fold_separators(candidate) == fold_separators(ground_truth)) ground_truth = candidate;
      }
    } else if (const auto type = field("Question_Type")) {
      category = category_from_type(*type);
    }
    if (!category) {
      out.skipped.push_back(key + ": cannot determine category for \"" + *question + "\"");
      continue;
    }
    items.push_back({{"image", image_prefix + *image},
                     {"question", *question},
                     {"ground_truth", ground_truth},
                     {"category", to_label(*category)}});
    ++out.converted;
  }
  out.dataset = {{"source_format", kAdapterVersion}, {"items", std::move(items)}};
  return out;
}

}  // namespace zeshot::floodnet
