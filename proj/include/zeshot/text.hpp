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

// Text normalization shared by question lookup, answer passthrough and
// answer comparison. ASCII-only case folding.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>

namespace zeshot::text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Trims and replaces every internal whitespace run with a single space.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Lowercase, collapse whitespace, trim.
inline std::string normalize_answer(std::string_view s) { return collapse_whitespace(to_lower(s)); }

// Dictionary key form of a question: normalize_answer plus trailing
// punctuation stripped, except a final '?'.
inline std::string normalize_question(std::string_view s) {
  std::string out = normalize_answer(s);
  while (!out.empty() && is_punct(out.back()) && out.back() != '?') {
    out.pop_back();
    while (!out.empty() && is_space(out.back())) out.pop_back();
  }
  return out;
}

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 11> kDigitWords{{
    {"zero", "0"}, {"one", "1"}, {"two", "2"}, {"three", "3"}, {"four", "4"}, {"five", "5"},
    {"six", "6"}, {"seven", "7"}, {"eight", "8"}, {"nine", "9"}, {"ten", "10"},
}};

// Replaces whole tokens "zero".."ten" with numerals. Input is expected to be
// normalize_answer output.
inline std::string map_digit_words(std::string_view normalized) {
  std::string out;
  out.reserve(normalized.size());
  std::size_t pos = 0;
  while (pos <= normalized.size()) {
    std::size_t end = normalized.find(' ', pos);
    if (end == std::string_view::npos) end = normalized.size();
    std::string_view token = normalized.substr(pos, end - pos);
    auto it = std::find_if(kDigitWords.begin(), kDigitWords.end(),
                           [&](const auto& kv) { return kv.first == token; });
    if (!out.empty() || pos > 0) out.push_back(' ');
    out.append(it != kDigitWords.end() ? it->second : token);
    pos = end + 1;
  }
  return out;
}

inline bool is_numeric(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace zeshot::text
