// Copyright 2026 The triebias Authors. All Rights Reserved.
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

// Biasing lists: common/rare split by corpus frequency and per-utterance
// lists of reference rare words plus sampled distractors.

#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triebias/error.hpp"
#include "triebias/io.hpp"
#include "triebias/token_core.hpp"

namespace triebias {

inline constexpr int kDefaultCommonCutoff = 5000;
inline constexpr int kDefaultDistractors = 1000;

/// Both word sets are kept sorted.
struct VocabularySplit {
  std::vector<std::string> common;
  std::vector<std::string> rare;

  bool is_common(std::string_view w) const {
    return std::binary_search(common.begin(), common.end(), w);
  }
  bool is_rare(std::string_view w) const {
    return std::binary_search(rare.begin(), rare.end(), w);
  }
};

/// Top `cutoff` words by count become common (ties broken by ascending
/// word), the rest rare. Words are normalized first.
inline VocabularySplit split_vocabulary(
    std::vector<std::pair<std::string, std::int64_t>> counts, int cutoff) {
  if (cutoff < 0) throw InputError("cutoff must be >= 0");
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  VocabularySplit split;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    auto& target = i < static_cast<std::size_t>(cutoff) ? split.common
                                                         : split.rare;
    target.push_back(std::move(counts[i].first));
  }
  std::sort(split.common.begin(), split.common.end());
  std::sort(split.rare.begin(), split.rare.end());
  return split;
}

/// Reads `word<TAB>count` lines.
inline std::vector<std::pair<std::string, std::int64_t>> parse_frequencies(
    std::istream& in, const std::string& name) {
  std::vector<std::pair<std::string, std::int64_t>> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (io::trim(line).empty()) continue;
    const auto at = io::where(name, line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw InputError(at + ": expected word<TAB>count");
    auto word = normalize_word(line.substr(0, tab)).text;
    if (word.empty()) throw InputError(at + ": empty word");
    std::int64_t count = 0;
    try {
      std::size_t used = 0;
      const std::string text(io::trim(std::string_view(line).substr(tab + 1)));
      count = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InputError(at + ": bad count");
    }
    if (count <= 0) throw InputError(at + ": count must be positive");
    if (!seen.insert(word).second) {
      throw InputError(at + ": duplicate word '" + word + "'");
    }
    out.emplace_back(std::move(word), count);
  }
  return out;
}

inline VocabularySplit load_vocabulary_split(const std::string& freq_path,
                                             int cutoff = kDefaultCommonCutoff) {
  auto in = io::open_input(freq_path);
  return split_vocabulary(parse_frequencies(in, freq_path), cutoff);
}

/// Split from published word lists, one word per line.
inline VocabularySplit load_split_lists(const std::string& common_path,
                                        const std::string& rare_path) {
  auto read = [](const std::string& path) {
    auto in = io::open_input(path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      auto w = normalize_word(io::trim(line)).text;
      if (!w.empty()) words.push_back(std::move(w));
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
  };
  VocabularySplit split{read(common_path), read(rare_path)};
  std::vector<std::string> both;
  std::set_intersection(split.common.begin(), split.common.end(),
                        split.rare.begin(), split.rare.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    throw InputError("word '" + both.front() + "' is both common and rare");
  }
  return split;
}

struct UtteranceBiasList {
  std::string utterance_id;
  std::vector<std::string> targets;
  std::vector<std::string> distractors;
  bool short_pool = false;  // fewer rare words than requested distractors

  std::vector<std::string> full() const {
    auto out = targets;
    out.insert(out.end(), distractors.begin(), distractors.end());
    return out;
  }
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, n); portable across standard libraries unlike
// std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % n;
  }
}

}  // namespace detail

inline std::uint64_t utterance_seed(std::uint64_t seed, std::string_view utt) {
  return detail::splitmix64(seed ^ detail::fnv1a64(utt));
}

/// Targets are the reference's rare words in first-occurrence order.
/// Distractors are `n_distractors` rare words not among the targets, drawn
/// without replacement (Floyd's algorithm) from an RNG keyed by
/// (seed, utterance id), and listed in sorted order.
inline UtteranceBiasList build_utterance_list(
    std::string utterance_id, std::span<const std::string> ref,
    const VocabularySplit& split, int n_distractors, std::uint64_t seed) {
  if (n_distractors < 0) throw InputError("distractor count must be >= 0");
  UtteranceBiasList list;
  list.utterance_id = std::move(utterance_id);
  std::vector<std::size_t> excluded;
  for (const auto& w : ref) {
    auto it = std::lower_bound(split.rare.begin(), split.rare.end(), w);
    if (it == split.rare.end() || *it != w) continue;
    if (std::find(list.targets.begin(), list.targets.end(), w) !=
        list.targets.end()) {
      continue;
    }
    list.targets.push_back(w);
    excluded.push_back(static_cast<std::size_t>(it - split.rare.begin()));
  }
  std::sort(excluded.begin(), excluded.end());

  const std::size_t pool = split.rare.size() - excluded.size();
  std::size_t want = static_cast<std::size_t>(n_distractors);
  if (want > pool) {
    want = pool;
    list.short_pool = true;
  }
  // Virtual index over rare \ targets -> index into split.rare.
  auto resolve = [&](std::size_t v) {
    std::size_t actual = v;
    for (std::size_t ex : excluded) {
      if (ex <= actual) {
        ++actual;
      } else {
        break;
      }
    }
    return actual;
  };
  std::mt19937_64 rng(utterance_seed(seed, list.utterance_id));
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(want * 2);
  for (std::size_t j = pool - want; j < pool; ++j) {
    const std::size_t t = detail::bounded(rng, j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::size_t> picked(chosen.begin(), chosen.end());
  std::sort(picked.begin(), picked.end());
  for (std::size_t v : picked) list.distractors.push_back(split.rare[resolve(v)]);
  return list;
}

inline nlohmann::json bias_list_to_json(const UtteranceBiasList& list) {
  return {{"utt", list.utterance_id},
          {"targets", list.targets},
          {"distractors", list.distractors}};
}

inline UtteranceBiasList bias_list_from_json(const nlohmann::json& j) {
  UtteranceBiasList list;
  list.utterance_id = j.at("utt").get<std::string>();
  list.targets = j.at("targets").get<std::vector<std::string>>();
  list.distractors = j.at("distractors").get<std::vector<std::string>>();
  return list;
}

inline std::vector<UtteranceBiasList> load_bias_lists(const std::string& path) {
  auto in = io::open_input(path);
  std::vector<UtteranceBiasList> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    try {
      out.push_back(bias_list_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(io::where(path, line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace triebias
