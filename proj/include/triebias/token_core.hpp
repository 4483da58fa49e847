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

// Token ids, vocabularies and word normalization.

#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <cctype>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "triebias/error.hpp"
#include "triebias/io.hpp"

namespace triebias {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

/// Immutable id -> piece table. Pieces are raw UTF-8 and may carry leading
/// whitespace (byte-level BPE convention).
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Throws InputError on a duplicate id.
  void add(TokenId id, std::string piece) {
    if (id < 0) throw InputError("negative token id " + std::to_string(id));
    if (!pieces_.emplace(id, std::move(piece)).second) {
      throw InputError("duplicate token id " + std::to_string(id));
    }
  }

  void mark_special(TokenId id) {
    if (!contains(id)) {
      throw InputError("special id " + std::to_string(id) +
                       " is not in the vocabulary");
    }
    special_.insert(id);
  }

  bool contains(TokenId id) const { return pieces_.count(id) != 0; }
  bool is_special(TokenId id) const { return special_.count(id) != 0; }
  std::size_t size() const { return pieces_.size(); }
  const std::set<TokenId>& special_ids() const { return special_; }

  const std::string& piece(TokenId id) const {
    auto it = pieces_.find(id);
    if (it == pieces_.end()) {
      throw InputError("unknown token id " + std::to_string(id));
    }
    return it->second;
  }

  /// First special id whose piece is one of `names`, or -1.
  TokenId find_special(std::initializer_list<std::string_view> names) const {
    for (TokenId id : special_) {
      const auto& p = pieces_.at(id);
      if (std::find(names.begin(), names.end(), p) != names.end()) return id;
    }
    return -1;
  }

  /// Ids in ascending order.
  std::vector<TokenId> ids() const {
    std::vector<TokenId> out;
    out.reserve(pieces_.size());
    for (const auto& [id, _] : pieces_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::unordered_map<TokenId, std::string> pieces_;
  std::set<TokenId> special_;
};

/// Parses the vocabulary format: `#special:<ids>` header plus
/// `<id><TAB><JSON string>` entries.
inline Vocabulary parse_vocabulary(std::istream& in, const std::string& name) {
  Vocabulary vocab;
  std::vector<TokenId> special;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw InputError(io::where(name, line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#special:", 0) == 0) {
      std::string_view rest = std::string_view(line).substr(9);
      while (!rest.empty()) {
        auto comma = rest.find(',');
        auto item = io::trim(rest.substr(0, comma));
        if (!item.empty()) {
          try {
            std::size_t used = 0;
            int v = std::stoi(std::string(item), &used);
            if (used != item.size()) fail("bad special id '" + std::string(item) + "'");
            special.push_back(v);
          } catch (const std::logic_error&) {
            fail("bad special id '" + std::string(item) + "'");
          }
        }
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      continue;
    }
    if (line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected <id><TAB><piece>");
    TokenId id = 0;
    try {
      std::size_t used = 0;
      const std::string id_text = line.substr(0, tab);
      id = std::stoi(id_text, &used);
      if (used != id_text.size()) fail("bad token id '" + id_text + "'");
    } catch (const std::logic_error&) {
      fail("bad token id '" + line.substr(0, tab) + "'");
    }
    nlohmann::json piece;
    try {
      piece = nlohmann::json::parse(line.substr(tab + 1));
    } catch (const nlohmann::json::parse_error&) {
      fail("piece is not a JSON string");
    }
    if (!piece.is_string()) fail("piece is not a JSON string");
    try {
      vocab.add(id, piece.get<std::string>());
    } catch (const InputError& e) {
      fail(e.what());
    }
  }
  for (TokenId id : special) {
    try {
      vocab.mark_special(id);
    } catch (const InputError& e) {
      throw InputError(name + ": " + e.what());
    }
  }
  return vocab;
}

inline Vocabulary load_vocabulary(const std::string& path) {
  auto in = io::open_input(path);
  return parse_vocabulary(in, path);
}

inline std::string detokenize(std::span<const TokenId> seq,
                              const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!vocab.contains(seq[i])) {
      throw InputError("unknown token id " + std::to_string(seq[i]) +
                       " at position " + std::to_string(i));
    }
    out += vocab.piece(seq[i]);
  }
  return out;
}

struct NormalizedWord {
  std::string text;
  std::string original;
};

/// Lowercases, drops characters outside [a-z0-9'-], and strips leading and
/// trailing apostrophes and hyphens. Non-ASCII bytes are dropped.
inline NormalizedWord normalize_word(std::string_view raw) {
  std::string kept;
  kept.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'' ||
        c == '-') {
      kept.push_back(static_cast<char>(c));
    }
  }
  auto is_edge = [](char c) { return c == '\'' || c == '-'; };
  std::size_t b = 0, e = kept.size();
  while (b < e && is_edge(kept[b])) ++b;
  while (e > b && is_edge(kept[e - 1])) --e;
  return {kept.substr(b, e - b), std::string(raw)};
}

/// Whitespace-split and normalize; words that normalize to "" are dropped.
inline std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      auto w = normalize_word(text.substr(i, j - i));
      if (!w.text.empty()) out.push_back(std::move(w.text));
    }
    i = j;
  }
  return out;
}

}  // namespace triebias
