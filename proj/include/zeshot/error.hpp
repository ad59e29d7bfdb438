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

#include <stdexcept>
#include <string>
#include <string_view>

namespace zeshot {

enum class Errc {
  parse,
  validation,
  duplicate_question,
  unknown_question,
  unknown_category,
  precondition,
  transport,
  timeout,
  backend_status,
  empty_answer,
  count_mismatch,
  dimension_mismatch,
  zero_norm,
  missing_key,
  not_found,
  io,
  cancelled,
};

// Pipeline stage an error is attributed to. `none` outside the pipeline.
enum class Stage { none, lookup, generation, matching };

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::parse: return "parse";
    case Errc::validation: return "validation";
    case Errc::duplicate_question: return "duplicate-question";
    case Errc::unknown_question: return "unknown-question";
    case Errc::unknown_category: return "unknown-category";
    case Errc::precondition: return "precondition";
    case Errc::transport: return "transport";
    case Errc::timeout: return "timeout";
    case Errc::backend_status: return "backend-status";
    case Errc::empty_answer: return "empty-answer";
    case Errc::count_mismatch: return "count-mismatch";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::zero_norm: return "zero-norm";
    case Errc::missing_key: return "missing-key";
    case Errc::not_found: return "not-found";
    case Errc::io: return "io";
    case Errc::cancelled: return "cancelled";
  }
  return "unknown";
}

inline std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::none: return "none";
    case Stage::lookup: return "lookup";
    case Stage::generation: return "generation";
    case Stage::matching: return "matching";
  }
  return "none";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, Stage stage = Stage::none)
      : std::runtime_error(message), code_(code), stage_(stage) {}

  Errc code() const noexcept { return code_; }
  Stage stage() const noexcept { return stage_; }

  // Copy of this error attributed to `stage`.
  Error at_stage(Stage stage) const { return Error(code_, what(), stage); }

 private:
  Errc code_;
  Stage stage_;
};

// Raised by QuestionBank::lookup. Carries the normalized form that missed.
class UnknownQuestionError : public Error {
 public:
  explicit UnknownQuestionError(std::string normalized)
      : Error(Errc::unknown_question, "unknown question: \"" + normalized + "\""),
        normalized_(std::move(normalized)) {}

  const std::string& normalized() const noexcept { return normalized_; }

 private:
  std::string normalized_;
};

}  // namespace zeshot
