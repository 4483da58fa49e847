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

// Pronunciation-variant mining from transcripts of templated synthetic
// speech: template rendering, marker-anchored span extraction, and the
// syllable filter.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triebias/bias_trie.hpp"
#include "triebias/error.hpp"
#include "triebias/io.hpp"
#include "triebias/token_core.hpp"

namespace triebias {

struct TemplateSpec {
  static constexpr std::string_view kSlot = "{}";
  std::vector<std::string> patterns{"Start {} End", "Begin {}"};

  void validate() const {
    for (const auto& p : patterns) {
      const auto first = p.find(kSlot);
      if (first == std::string::npos ||
          p.find(kSlot, first + kSlot.size()) != std::string::npos) {
        throw InputError("template '" + p + "' must contain exactly one {}");
      }
    }
  }
};

inline std::vector<std::string> render_templates(const Hotword& hotword,
                                                 const TemplateSpec& spec) {
  spec.validate();
  std::vector<std::string> out;
  for (const auto& p : spec.patterns) {
    std::string s = p;
    s.replace(s.find(TemplateSpec::kSlot), TemplateSpec::kSlot.size(),
              hotword.canonical_text);
    out.push_back(std::move(s));
  }
  return out;
}

/// Token spellings of the anchor words. Each group lists every tokenization
/// observed for the model (leading space, capitalization, ...).
struct MarkerConfig {
  std::vector<TokenSequence> start;
  std::vector<TokenSequence> end;
  std::vector<TokenSequence> begin;
  std::set<TokenId> punctuation;  // stripped from the tail of "begin" spans

  void validate() const {
    auto check = [](const std::vector<TokenSequence>& group,
                    const char* name) {
      if (group.empty()) {
        throw InputError(std::string("marker group '") + name + "' is empty");
      }
      for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i].empty()) {
          throw InputError(std::string("empty sequence in marker group '") +
                           name + "'");
        }
        for (std::size_t k = 0; k < group.size(); ++k) {
          if (i == k) continue;
          const auto& a = group[i];
          const auto& b = group[k];
          if (a.size() <= b.size() &&
              std::equal(a.begin(), a.end(), b.begin())) {
            throw InputError(std::string("marker group '") + name +
                             "' has a sequence that prefixes another");
          }
        }
      }
    };
    check(start, "start");
    check(end, "end");
    check(begin, "begin");
  }
};

inline MarkerConfig parse_marker_config(const nlohmann::json& j) {
  MarkerConfig m;
  try {
    m.start = j.at("start").get<std::vector<TokenSequence>>();
    m.end = j.at("end").get<std::vector<TokenSequence>>();
    m.begin = j.at("begin").get<std::vector<TokenSequence>>();
    if (j.contains("punctuation")) {
      auto p = j.at("punctuation").get<std::vector<TokenId>>();
      m.punctuation.insert(p.begin(), p.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed marker config: ") + e.what());
  }
  m.validate();
  return m;
}

inline MarkerConfig load_marker_config(const std::string& path) {
  auto in = io::open_input(path);
  try {
    return parse_marker_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

enum class VariantSource { kBetweenStartEnd, kAfterBegin };

struct VariantCandidate {
  int hotword_id = 0;
  TokenSequence tokens;
  std::string surface;
  VariantSource source = VariantSource::kBetweenStartEnd;
};

struct MarkedSpan {
  TokenSequence tokens;
  VariantSource source;
};

namespace detail {

enum class MarkerKind { kStart, kEnd, kBegin };

struct MarkerHit {
  std::size_t pos;
  std::size_t len;
  MarkerKind kind;
};

inline std::vector<MarkerHit> find_markers(std::span<const TokenId> tokens,
                                           const MarkerConfig& markers) {
  std::vector<MarkerHit> hits;
  auto scan = [&](const std::vector<TokenSequence>& group, MarkerKind kind) {
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      for (const auto& seq : group) {
        if (pos + seq.size() <= tokens.size() &&
            std::equal(seq.begin(), seq.end(), tokens.begin() + pos)) {
          hits.push_back({pos, seq.size(), kind});
          break;
        }
      }
    }
  };
  scan(markers.start, MarkerKind::kStart);
  scan(markers.end, MarkerKind::kEnd);
  scan(markers.begin, MarkerKind::kBegin);
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.pos != b.pos ? a.pos < b.pos : a.len > b.len;
  });
  return hits;
}

inline bool overlaps_marker(const std::vector<MarkerHit>& hits,
                            std::size_t b, std::size_t e) {
  return std::any_of(hits.begin(), hits.end(), [&](const MarkerHit& h) {
    return h.pos < e && h.pos + h.len > b;
  });
}

}  // namespace detail

/// Raw anchored spans, before any discard or deduplication.
///
/// A start marker pairs with the nearest end marker after it and yields the
/// tokens strictly between them. A begin marker yields everything after it up
/// to the next marker (or the end of the transcript) with trailing
/// punctuation and control tokens removed. Spans that are empty, cross
/// another marker, or still contain a control token are dropped.
inline std::vector<MarkedSpan> find_marked_spans(
    std::span<const TokenId> tokens, const MarkerConfig& markers,
    const Vocabulary& vocab) {
  const auto hits = detail::find_markers(tokens, markers);
  std::vector<MarkedSpan> out;
  auto emit = [&](std::size_t b, std::size_t e, VariantSource src) {
    if (e <= b || detail::overlaps_marker(hits, b, e)) return;
    TokenSequence seq(tokens.begin() + b, tokens.begin() + e);
    if (std::any_of(seq.begin(), seq.end(),
                    [&](TokenId t) { return vocab.is_special(t); })) {
      return;
    }
    out.push_back({std::move(seq), src});
  };
  for (const auto& h : hits) {
    const std::size_t after = h.pos + h.len;
    if (h.kind == detail::MarkerKind::kStart) {
      for (const auto& e : hits) {
        if (e.kind == detail::MarkerKind::kEnd && e.pos >= after) {
          emit(after, e.pos, VariantSource::kBetweenStartEnd);
          break;
        }
      }
    } else if (h.kind == detail::MarkerKind::kBegin) {
      std::size_t stop = tokens.size();
      for (const auto& o : hits) {
        if (o.pos >= after) {
          stop = o.pos;
          break;
        }
      }
      while (stop > after && (markers.punctuation.count(tokens[stop - 1]) ||
                              vocab.is_special(tokens[stop - 1]))) {
        --stop;
      }
      emit(after, stop, VariantSource::kAfterBegin);
    }
  }
  return out;
}

/// Candidates from one transcript: exact matches of the canonical
/// tokenization are discarded and duplicates merged (first kept).
inline std::vector<VariantCandidate> extract_candidates(
    std::span<const TokenId> transcript, const MarkerConfig& markers,
    const Hotword& hotword, const Vocabulary& vocab) {
  std::vector<VariantCandidate> out;
  for (auto& span : find_marked_spans(transcript, markers, vocab)) {
    if (span.tokens == hotword.canonical_tokens) continue;
    if (std::any_of(out.begin(), out.end(), [&](const VariantCandidate& c) {
          return c.tokens == span.tokens;
        })) {
      continue;
    }
    VariantCandidate c;
    c.hotword_id = hotword.id;
    c.surface = detokenize(span.tokens, vocab);
    c.tokens = std::move(span.tokens);
    c.source = span.source;
    out.push_back(std::move(c));
  }
  return out;
}

namespace detail {

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

// True when the vowel pair ending at w[i] is usually pronounced as two
// syllables.
inline bool splits_hiatus(std::string_view w, std::size_t i) {
  const char a = w[i - 1];
  const char b = w[i];
  const char before = i >= 2 ? w[i - 2] : '\0';
  auto one_of = [](char c, std::string_view set) {
    return c != '\0' && set.find(c) != std::string_view::npos;
  };
  if (a == 'i' && (b == 'a' || b == 'o')) return !one_of(before, "ctsgx");
  if (a == 'i' && b == 'u') return !one_of(before, "qg");
  if (a == 'u' && (b == 'a' || b == 'o')) return !one_of(before, "qg");
  if (a == 'i' && b == 'i') return true;
  if (a == 'e' && b == 'a' && i + 1 == w.size()) {
    // word-final "ea" after a consonant that follows a vowel: idea, area
    return i >= 3 && !is_vowel(before) && is_vowel(w[i - 3]);
  }
  return false;
}

inline int count_word_syllables(std::string_view w) {
  int count = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!is_vowel(w[i])) continue;
    if (i == 0 || !is_vowel(w[i - 1]) || splits_hiatus(w, i)) ++count;
  }
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2])) {
    const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (!consonant_le) --count;
  }
  return std::max(count, 1);
}

}  // namespace detail

/// Heuristic syllable count: vowel groups (y counts as a vowel) with a few
/// hiatus splits, minus a silent final e (kept after consonant + "le"),
/// floored at 1 per word. Multi-word input sums over words. Throws
/// InputError if no word contains a letter.
inline int count_syllables(std::string_view text) {
  int total = 0;
  bool any = false;
  for (const auto& word : normalized_words(text)) {
    std::string letters;
    for (char c : word) {
      if (c >= 'a' && c <= 'z') letters.push_back(c);
    }
    if (letters.empty()) continue;
    any = true;
    total += detail::count_word_syllables(letters);
  }
  if (!any) {
    throw InputError("cannot count syllables of '" + std::string(text) + "'");
  }
  return total;
}

inline constexpr int kMinVariantSyllables = 3;

/// Keeps candidates whose syllable count equals the hotword's and is at
/// least kMinVariantSyllables.
inline std::vector<VariantCandidate> syllable_filter(
    std::span<const VariantCandidate> cands, const Hotword& hotword) {
  std::vector<VariantCandidate> out;
  int target = 0;
  try {
    target = count_syllables(hotword.canonical_text);
  } catch (const InputError&) {
    return out;
  }
  if (target < kMinVariantSyllables) return out;
  for (const auto& c : cands) {
    int n = 0;
    try {
      n = count_syllables(c.surface);
    } catch (const InputError&) {
      continue;
    }
    if (n == target) out.push_back(c);
  }
  return out;
}

// Batch pipeline over bridge transcripts.

struct TranscriptRecord {
  int hotword_id = 0;
  int template_index = 0;
  std::string engine;
  std::string voice;
  TokenSequence tokens;
};

inline std::vector<TranscriptRecord> parse_transcripts(
    std::istream& in, const std::string& name) {
  std::vector<TranscriptRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("error") && !j.contains("tokens")) continue;
      TranscriptRecord r;
      r.hotword_id = j.at("hotword_id").get<int>();
      r.template_index = j.value("template", 0);
      r.engine = j.value("engine", std::string());
      r.voice = j.value("voice", std::string());
      r.tokens = j.at("tokens").get<TokenSequence>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(io::where(name, line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TranscriptRecord> load_transcripts(const std::string& path) {
  auto in = io::open_input(path);
  return parse_transcripts(in, path);
}

struct ExtractionStats {
  int hotword_id = 0;
  int transcripts = 0;
  int misses = 0;           // transcripts with no usable span
  int spans = 0;            // raw anchored spans
  int exact_matches = 0;    // discarded: identical to the canonical tokens
  int unique_candidates = 0;
  int kept = 0;             // survived the syllable filter
};

struct ExtractionResult {
  std::vector<Hotword> hotwords;  // canonical first, then kept variants
  std::vector<ExtractionStats> stats;
};

/// Full variant mining: per hotword, extract candidates from every
/// transcript, merge duplicates across transcripts, then apply the syllable
/// filter. Transcripts naming an unknown hotword are an error.
inline ExtractionResult extract_variants(
    std::span<const TranscriptRecord> transcripts, const MarkerConfig& markers,
    std::span<const Hotword> hotwords, const Vocabulary& vocab) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < hotwords.size(); ++i) index[hotwords[i].id] = i;

  std::vector<std::vector<VariantCandidate>> pooled(hotwords.size());
  ExtractionResult result;
  result.stats.resize(hotwords.size());
  for (std::size_t i = 0; i < hotwords.size(); ++i) {
    result.stats[i].hotword_id = hotwords[i].id;
  }

  for (const auto& t : transcripts) {
    auto it = index.find(t.hotword_id);
    if (it == index.end()) {
      throw InputError("transcript references unknown hotword " +
                       std::to_string(t.hotword_id));
    }
    const auto& hw = hotwords[it->second];
    auto& st = result.stats[it->second];
    ++st.transcripts;
    const auto spans = find_marked_spans(t.tokens, markers, vocab);
    st.spans += static_cast<int>(spans.size());
    st.exact_matches += static_cast<int>(
        std::count_if(spans.begin(), spans.end(), [&](const MarkedSpan& s) {
          return s.tokens == hw.canonical_tokens;
        }));
    if (spans.empty()) ++st.misses;
    auto& pool = pooled[it->second];
    for (auto& c : extract_candidates(t.tokens, markers, hw, vocab)) {
      if (std::none_of(pool.begin(), pool.end(),
                       [&](const VariantCandidate& p) {
                         return p.tokens == c.tokens;
                       })) {
        pool.push_back(std::move(c));
      }
    }
  }

  for (std::size_t i = 0; i < hotwords.size(); ++i) {
    Hotword out = hotwords[i];
    const auto kept = syllable_filter(pooled[i], hotwords[i]);
    result.stats[i].unique_candidates = static_cast<int>(pooled[i].size());
    result.stats[i].kept = static_cast<int>(kept.size());
    out.variants.clear();
    if (!out.canonical_tokens.empty()) {
      out.variants.push_back(out.canonical_tokens);
    }
    for (const auto& c : kept) {
      if (std::find(out.variants.begin(), out.variants.end(), c.tokens) ==
          out.variants.end()) {
        out.variants.push_back(c.tokens);
      }
    }
    result.hotwords.push_back(std::move(out));
  }
  return result;
}

}  // namespace triebias
