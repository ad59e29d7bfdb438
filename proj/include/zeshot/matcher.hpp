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

// Answer matching. A free-form generated answer is projected onto the
// candidate set of its question:
//
//   reference query   Qf   = question + " " + raw answer
//   candidate queries QA_m = question + " " + candidate_m
//   score_m                = cos(g(Qf), g(QA_m))
//
// and the highest-scoring candidate is selected, lowest index on ties. The
// question used here is the bank question, never the prompt with choices
// appended.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zeshot/backend.hpp"
#include "zeshot/error.hpp"
#include "zeshot/text.hpp"

namespace zeshot {

struct CandidateQuery {
  std::string candidate;
  std::string query_text;

  bool operator==(const CandidateQuery&) const = default;
};

struct QuerySet {
  std::string question;
  std::vector<CandidateQuery> candidate_queries;

  std::vector<std::string> texts() const {
    std::vector<std::string> out;
    out.reserve(candidate_queries.size());
    for (const auto& q : candidate_queries) out.push_back(q.query_text);
    return out;
  }
};

struct MatchResult {
  std::string selected;
  std::size_t selected_index = 0;
  std::vector<double> scores;  // aligned with the candidates
  std::string reference_query;

  bool operator==(const MatchResult&) const = default;
};

inline nlohmann::json to_json(const MatchResult& m) {
  return {{"selected", m.selected},
          {"selected_index", m.selected_index},
          {"scores", m.scores},
          {"reference_query", m.reference_query}};
}

inline QuerySet build_query_set(std::string_view question, std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error(Errc::precondition, "query set needs at least one candidate");
  QuerySet set{std::string(question), {}};
  set.candidate_queries.reserve(candidates.size());
  for (const auto& c : candidates) {
    std::string query(question);
    query.push_back(' ');
    query.append(c);
    set.candidate_queries.push_back({c, std::move(query)});
  }
  return set;
}

inline std::string build_reference_query(std::string_view question, std::string_view raw_answer) {
  const std::string_view answer = text::trim(raw_answer);
  if (answer.empty()) throw Error(Errc::empty_answer, "reference query needs a non-blank answer");
  std::string out(question);
  out.push_back(' ');
  out.append(answer);
  return out;
}

// (u.v) / (|u| |v|) in double precision, clamped to [-1, 1]. Zero-norm
// inputs are an error.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(Errc::dimension_mismatch, "cosine similarity of vectors with dims " +
                                              std::to_string(u.size()) + " and " +
                                              std::to_string(v.size()));
  }
  // Power-of-two rescaling is exact and keeps the sums clear of underflow
  // and overflow; cosine is scale invariant.
  auto max_abs = [](std::span<const double> x) {
    double m = 0.0;
    for (double e : x) m = std::max(m, std::abs(e));
    return m;
  };
  const double mu = max_abs(u);
  const double mv = max_abs(v);
  if (mu == 0.0 || mv == 0.0) throw Error(Errc::zero_norm, "cosine similarity of a zero-norm vector");
  const int eu = std::ilogb(mu);
  const int ev = std::ilogb(mv);
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::scalbn(u[i], -eu);
    const double b = std::scalbn(v[i], -ev);
    dot += a * b;
    uu += a * a;
    vv += b * b;
  }
  // sqrt(uu * vv) keeps identical vectors at exactly 1.0; fall back to the
  // split form when the product leaves the normal range.
  double denom = std::sqrt(uu * vv);
  if (!std::isfinite(denom) || !std::isnormal(uu * vv)) denom = std::sqrt(uu) * std::sqrt(vv);
  return std::clamp(dot / denom, -1.0, 1.0);
}

inline double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine_similarity(u.values(), v.values());
}

// Index of the maximum score; the lowest index wins ties.
inline std::size_t select_best(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::precondition, "no scores to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

// Embeds the reference query and every candidate query in one batch
// (reference first), scores each candidate and selects the best.
inline MatchResult match_answer(const Embedder& embedder, std::string_view question,
                                std::span<const std::string> candidates,
                                std::string_view raw_answer) {
  const QuerySet set = build_query_set(question, candidates);
  MatchResult result;
  result.reference_query = build_reference_query(question, raw_answer);

  std::vector<std::string> batch;
  batch.reserve(candidates.size() + 1);
  batch.push_back(result.reference_query);
  for (const auto& q : set.candidate_queries) batch.push_back(q.query_text);

  const auto vectors = embed_texts(embedder, batch);
  result.scores.reserve(candidates.size());
  for (std::size_t m = 1; m < vectors.size(); ++m) {
    result.scores.push_back(cosine_similarity(vectors.front(), vectors[m]));
  }
  result.selected_index = select_best(result.scores);
  result.selected = candidates[result.selected_index];
  return result;
}

}  // namespace zeshot
