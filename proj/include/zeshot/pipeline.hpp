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

// End-to-end question answering: lookup, prompt modification, generation
// and, for constrained questions, answer matching.

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/embedding_cache.hpp"
#include "zeshot/error.hpp"
#include "zeshot/matcher.hpp"
#include "zeshot/question_bank.hpp"
#include "zeshot/text.hpp"

namespace zeshot {

// mapped: constrained bank question, answer projected onto its candidates.
// passthrough: open (counting) bank question, raw answer kept.
// fallback_raw: question not in the bank, raw answer kept and flagged.
enum class ModeApplied { mapped, passthrough, fallback_raw };

inline std::string_view to_label(ModeApplied m) {
  switch (m) {
    case ModeApplied::mapped: return "mapped";
    case ModeApplied::passthrough: return "passthrough";
    case ModeApplied::fallback_raw: return "fallback-raw";
  }
  return "";
}

inline ModeApplied parse_mode_applied(std::string_view label) {
  if (label == "mapped") return ModeApplied::mapped;
  if (label == "passthrough") return ModeApplied::passthrough;
  if (label == "fallback-raw") return ModeApplied::fallback_raw;
  throw Error(Errc::parse, "unknown mode_applied \"" + std::string(label) + "\"");
}

struct StageTimings {
  double lookup_ms = 0;
  double generation_ms = 0;
  double matching_ms = 0;
  double total_ms = 0;
};

struct AnswerRecord {
  ImageRef image;
  std::string question_raw;
  std::optional<QuestionEntry> question_entry;
  std::string modified_question;
  std::string raw_answer;
  std::optional<MatchResult> match;
  std::string final_answer;
  ModeApplied mode_applied = ModeApplied::fallback_raw;
  bool flagged = false;  // set for fallback_raw
  StageTimings timings;

  // Equality ignoring timings.
  bool same_outcome(const AnswerRecord& o) const {
    return image == o.image && question_raw == o.question_raw &&
           question_entry == o.question_entry && modified_question == o.modified_question &&
           raw_answer == o.raw_answer && match == o.match && final_answer == o.final_answer &&
           mode_applied == o.mode_applied && flagged == o.flagged;
  }
};

// Field names are stable; the service and CLI emit exactly this.
inline nlohmann::json to_json(const AnswerRecord& r, bool with_timings = true) {
  nlohmann::json j{
      {"image", to_json(r.image)},
      {"question_raw", r.question_raw},
      {"question_entry", r.question_entry ? to_json(*r.question_entry) : nlohmann::json()},
      {"modified_question", r.modified_question},
      {"raw_answer", r.raw_answer},
      {"match", r.match ? to_json(*r.match) : nlohmann::json()},
      {"final_answer", r.final_answer},
      {"mode_applied", to_label(r.mode_applied)},
      {"flagged", r.flagged},
  };
  if (r.match && r.question_entry) j["match"]["candidates"] = r.question_entry->answers;
  if (with_timings) {
    j["timings"] = {{"lookup_ms", r.timings.lookup_ms},
                    {"generation_ms", r.timings.generation_ms},
                    {"matching_ms", r.timings.matching_ms},
                    {"total_ms", r.timings.total_ms}};
  }
  return j;
}

// Passthrough normalization: lowercase, trim, collapse whitespace; counting
// answers additionally get digit words mapped to numerals.
inline std::string normalize_raw_answer(std::string_view raw, bool counting) {
  std::string out = text::normalize_answer(raw);
  return counting ? text::map_digit_words(out) : out;
}

class Pipeline {
 public:
  // cache_capacity == 0 disables the embedding cache.
  Pipeline(std::shared_ptr<const QuestionBank> bank, std::shared_ptr<const Generator> generator,
           std::shared_ptr<const Embedder> embedder, std::size_t cache_capacity = 0)
      : bank_(std::move(bank)), generator_(std::move(generator)) {
    if (!bank_ || !generator_ || !embedder) {
      throw Error(Errc::precondition, "pipeline needs a bank, a generator and an embedder");
    }
    if (cache_capacity > 0) {
      auto caching = std::make_shared<CachingEmbedder>(std::move(embedder), cache_capacity);
      caching_ = caching.get();
      embedder_ = std::move(caching);
    } else {
      embedder_ = std::move(embedder);
    }
  }

  AnswerRecord answer(const ImageRef& image, std::string_view question) const {
    using Clock = std::chrono::steady_clock;
    auto ms_since = [](Clock::time_point t) {
      return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
    };
    const auto start = Clock::now();

    AnswerRecord rec;
    rec.image = image;
    rec.question_raw = std::string(question);
    if (const QuestionEntry* entry = bank_->find(question)) rec.question_entry = *entry;
    rec.timings.lookup_ms = ms_since(start);

    if (rec.question_entry) {
      rec.modified_question = modify_prompt(*rec.question_entry);
    } else {
      rec.modified_question = rec.question_raw;
    }

    const auto gen_start = Clock::now();
    try {
      rec.raw_answer = generator_->generate(image, rec.modified_question).text;
    } catch (const Error& e) {
      throw e.at_stage(Stage::generation);
    }
    rec.timings.generation_ms = ms_since(gen_start);

    if (!rec.question_entry) {
      rec.mode_applied = ModeApplied::fallback_raw;
      rec.flagged = true;
      rec.final_answer = normalize_raw_answer(rec.raw_answer, false);
    } else if (rec.question_entry->mode == AnswerMode::open) {
      rec.mode_applied = ModeApplied::passthrough;
      rec.final_answer = normalize_raw_answer(rec.raw_answer, true);
    } else {
      const auto match_start = Clock::now();
      try {
        rec.match = match_answer(*embedder_, rec.question_entry->question_text,
                                 rec.question_entry->answers, rec.raw_answer);
      } catch (const Error& e) {
        throw e.at_stage(Stage::matching);
      }
      rec.timings.matching_ms = ms_since(match_start);
      rec.mode_applied = ModeApplied::mapped;
      rec.final_answer = rec.match->selected;
    }
    rec.timings.total_ms = ms_since(start);
    return rec;
  }

  const QuestionBank& bank() const { return *bank_; }
  std::shared_ptr<const QuestionBank> bank_ptr() const { return bank_; }

  // Null when caching is disabled.
  const EmbeddingCache* cache() const { return caching_ ? &caching_->cache() : nullptr; }

 private:
  std::shared_ptr<const QuestionBank> bank_;
  std::shared_ptr<const Generator> generator_;
  std::shared_ptr<const Embedder> embedder_;
  const CachingEmbedder* caching_ = nullptr;
};

}  // namespace zeshot
