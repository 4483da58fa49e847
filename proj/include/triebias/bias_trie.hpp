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

// Multi-pronunciation prefix trie with per-arc rewards.
//
// Every hotword contributes one path per pronunciation variant. Arcs carry an
// integer reward: under the uniform scheme every arc is worth 1, under the
// final scheme only arcs that enter a terminal node are. A hypothesis walks
// the trie with a TrieCursor; partial matches that fall off the trie give
// back everything they earned since the last committed terminal.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triebias/error.hpp"
#include "triebias/token_core.hpp"

namespace triebias {

enum class RewardScheme { kFinal, kUniform };

inline std::string to_string(RewardScheme s) {
  return s == RewardScheme::kFinal ? "final" : "uniform";
}

inline RewardScheme parse_reward_scheme(std::string_view s) {
  if (s == "final") return RewardScheme::kFinal;
  if (s == "uniform") return RewardScheme::kUniform;
  throw InputError("unknown reward scheme '" + std::string(s) + "'");
}

struct Hotword {
  int id = 0;
  std::string canonical_text;
  TokenSequence canonical_tokens;
  std::vector<TokenSequence> variants;

  friend bool operator==(const Hotword&, const Hotword&) = default;
};

/// A committed hotword occurrence over token positions [begin, end).
struct Match {
  int hotword_id = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const Match&, const Match&) = default;
};

class BiasTrie {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kRoot = 0;

  struct Arc {
    TokenId token;
    NodeId target;
    friend bool operator==(const Arc&, const Arc&) = default;
  };

  explicit BiasTrie(RewardScheme scheme = RewardScheme::kUniform)
      : scheme_(scheme), nodes_(1) {}

  RewardScheme scheme() const { return scheme_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  bool empty() const { return nodes_.size() == 1; }

  std::optional<NodeId> child(NodeId node, TokenId token) const {
    const auto& arcs = nodes_[node].arcs;
    auto it = std::lower_bound(
        arcs.begin(), arcs.end(), token,
        [](const Arc& a, TokenId t) { return a.token < t; });
    if (it == arcs.end() || it->token != token) return std::nullopt;
    return it->target;
  }

  std::span<const Arc> arcs(NodeId node) const { return nodes_[node].arcs; }
  bool has_children(NodeId node) const { return !nodes_[node].arcs.empty(); }

  /// Reward of the arc entering `node` (0 for the root).
  int reward(NodeId node) const { return nodes_[node].reward; }
  std::optional<int> terminal(NodeId node) const {
    return nodes_[node].terminal;
  }
  std::size_t depth(NodeId node) const { return nodes_[node].depth; }

  friend bool operator==(const BiasTrie&, const BiasTrie&) = default;

 private:
  struct Node {
    std::vector<Arc> arcs;  // sorted by token
    int reward = 0;
    std::optional<int> terminal;
    std::size_t depth = 0;
    friend bool operator==(const Node&, const Node&) = default;
  };

  friend BiasTrie build_trie(std::span<const Hotword>, RewardScheme);

  RewardScheme scheme_;
  std::vector<Node> nodes_;
};

/// Builds the trie over every variant of every hotword. Paths are inserted
/// in sorted order so the node layout does not depend on input order.
/// Throws InputError when two hotwords share an identical variant.
inline BiasTrie build_trie(std::span<const Hotword> hotwords,
                           RewardScheme scheme) {
  std::map<TokenSequence, int> owner;
  for (const auto& hw : hotwords) {
    for (const auto& v : hw.variants) {
      if (v.empty()) {
        throw InputError("hotword " + std::to_string(hw.id) +
                         " has an empty variant");
      }
      auto [it, inserted] = owner.emplace(v, hw.id);
      if (!inserted && it->second != hw.id) {
        std::string seq;
        for (TokenId t : v) seq += (seq.empty() ? "" : ",") + std::to_string(t);
        throw InputError("ambiguous variant [" + seq + "] shared by hotwords " +
                         std::to_string(it->second) + " and " +
                         std::to_string(hw.id));
      }
    }
  }

  BiasTrie trie(scheme);
  auto& nodes = trie.nodes_;
  for (const auto& [path, hotword_id] : owner) {
    BiasTrie::NodeId node = BiasTrie::kRoot;
    for (TokenId token : path) {
      auto& arcs = nodes[node].arcs;
      auto it = std::lower_bound(
          arcs.begin(), arcs.end(), token,
          [](const BiasTrie::Arc& a, TokenId t) { return a.token < t; });
      if (it != arcs.end() && it->token == token) {
        node = it->target;
        continue;
      }
      const auto next = static_cast<BiasTrie::NodeId>(nodes.size());
      const std::size_t depth = nodes[node].depth + 1;
      arcs.insert(it, BiasTrie::Arc{token, next});
      nodes.emplace_back();
      nodes.back().depth = depth;
      node = next;
    }
    nodes[node].terminal = hotword_id;
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    nodes[i].reward =
        scheme == RewardScheme::kUniform || nodes[i].terminal ? 1 : 0;
  }
  return trie;
}

/// Position of one hypothesis inside the trie.
struct TrieCursor {
  BiasTrie::NodeId node = BiasTrie::kRoot;
  // Reward earned since the last commit point; this is what a mismatch
  // gives back.
  int pending_reward = 0;
  std::optional<std::size_t> match_start;
  std::optional<Match> last_committed;

  bool at_root() const { return node == BiasTrie::kRoot; }
  friend bool operator==(const TrieCursor&, const TrieCursor&) = default;
};

struct AdvanceOutcome {
  int reward_delta = 0;
  std::optional<Match> committed;
  TrieCursor cursor;
};

namespace detail {

inline void take_arc(const BiasTrie& trie, BiasTrie::NodeId next,
                     std::size_t position, AdvanceOutcome& out) {
  auto& c = out.cursor;
  if (c.at_root()) c.match_start = position;
  c.node = next;
  const int r = trie.reward(next);
  out.reward_delta += r;
  c.pending_reward += r;
  if (auto hw = trie.terminal(next)) {
    Match m{*hw, *c.match_start, position + 1};
    out.committed = m;
    c.last_committed = m;
    c.pending_reward = 0;
    if (!trie.has_children(next)) {
      c.node = BiasTrie::kRoot;
      c.match_start.reset();
    }
  }
}

}  // namespace detail

/// Feeds one token (at stream index `position`) to the cursor.
///
/// On a match the arc reward is earned; reaching a terminal commits the span
/// and zeroes the pending reward. On a mismatch the pending reward is rolled
/// back, the cursor returns to the root, and the token gets one chance to
/// start a fresh match from the root. Total; never touches the trie.
inline AdvanceOutcome advance(const BiasTrie& trie, const TrieCursor& cursor,
                              TokenId token, std::size_t position) {
  AdvanceOutcome out;
  out.cursor = cursor;
  if (auto next = trie.child(cursor.node, token)) {
    detail::take_arc(trie, *next, position, out);
    return out;
  }
  if (cursor.at_root()) return out;
  out.reward_delta = -cursor.pending_reward;
  out.cursor.node = BiasTrie::kRoot;
  out.cursor.pending_reward = 0;
  out.cursor.match_start.reset();
  if (auto next = trie.child(BiasTrie::kRoot, token)) {
    detail::take_arc(trie, *next, position, out);
  }
  return out;
}

/// End of hypothesis: rolls back any uncommitted partial match.
inline int finalize(TrieCursor& cursor) {
  const int delta = -cursor.pending_reward;
  cursor.node = BiasTrie::kRoot;
  cursor.pending_reward = 0;
  cursor.match_start.reset();
  return delta;
}

/// Appends a commit event, collapsing a shorter commit from the same attempt
/// (same start) into the deeper one.
inline void record_commit(std::vector<Match>& commits, const Match& m) {
  if (!commits.empty() && commits.back().begin == m.begin) {
    commits.back() = m;
  } else {
    commits.push_back(m);
  }
}

/// Reduces raw commit events to the reported match list.
inline std::vector<Match> committed_matches(std::span<const Match> events) {
  std::vector<Match> out;
  for (const auto& m : events) record_commit(out, m);
  return out;
}

// Hotword-list JSON-lines I/O.

enum class PathSelection { kCanonical, kVariants, kBoth };

inline PathSelection parse_path_selection(std::string_view s) {
  if (s == "canonical") return PathSelection::kCanonical;
  if (s == "variants") return PathSelection::kVariants;
  if (s == "both") return PathSelection::kBoth;
  throw InputError("unknown path selection '" + std::string(s) + "'");
}

/// Rewrites each hotword's variant list according to `sel`, deduplicated
/// with first occurrence kept. Hotwords left without paths are dropped.
inline std::vector<Hotword> select_paths(std::span<const Hotword> hotwords,
                                         PathSelection sel) {
  std::vector<Hotword> out;
  for (const auto& hw : hotwords) {
    Hotword h = hw;
    std::vector<TokenSequence> paths;
    auto add = [&](const TokenSequence& s) {
      if (!s.empty() && std::find(paths.begin(), paths.end(), s) == paths.end())
        paths.push_back(s);
    };
    if (sel != PathSelection::kVariants) add(hw.canonical_tokens);
    if (sel != PathSelection::kCanonical) {
      for (const auto& v : hw.variants) {
        if (sel == PathSelection::kVariants && v == hw.canonical_tokens) continue;
        add(v);
      }
    }
    h.variants = std::move(paths);
    if (!h.variants.empty()) out.push_back(std::move(h));
  }
  return out;
}

/// Every path token must exist in `vocab` and must not be a control token.
inline void validate_hotwords(std::span<const Hotword> hotwords,
                              const Vocabulary& vocab) {
  auto check = [&](const Hotword& hw, const TokenSequence& seq) {
    for (TokenId t : seq) {
      if (!vocab.contains(t)) {
        throw InputError("hotword " + std::to_string(hw.id) +
                         ": unknown token id " + std::to_string(t));
      }
      if (vocab.is_special(t)) {
        throw InputError("hotword " + std::to_string(hw.id) +
                         ": control token " + std::to_string(t) +
                         " in a pronunciation");
      }
    }
  };
  for (const auto& hw : hotwords) {
    check(hw, hw.canonical_tokens);
    for (const auto& v : hw.variants) check(hw, v);
  }
}

inline nlohmann::json hotword_to_json(const Hotword& hw) {
  return nlohmann::json{{"id", hw.id},
                        {"text", hw.canonical_text},
                        {"canonical", hw.canonical_tokens},
                        {"variants", hw.variants}};
}

inline std::vector<Hotword> parse_hotwords(std::istream& in,
                                           const std::string& name) {
  std::vector<Hotword> out;
  std::map<int, std::size_t> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto at = io::where(name, line_no);
    Hotword hw;
    try {
      const auto j = nlohmann::json::parse(line);
      hw.id = j.at("id").get<int>();
      hw.canonical_text = j.at("text").get<std::string>();
      hw.canonical_tokens = j.at("canonical").get<TokenSequence>();
      if (j.contains("variants")) {
        hw.variants = j.at("variants").get<std::vector<TokenSequence>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(at + ": " + e.what());
    }
    if (!ids.emplace(hw.id, out.size()).second) {
      throw InputError(at + ": duplicate hotword id " + std::to_string(hw.id));
    }
    for (std::size_t i = 0; i < hw.variants.size(); ++i) {
      if (hw.variants[i].empty()) {
        throw InputError(at + ": empty variant");
      }
      for (std::size_t k = 0; k < i; ++k) {
        if (hw.variants[k] == hw.variants[i]) {
          throw InputError(at + ": duplicate variant in hotword " +
                           std::to_string(hw.id));
        }
      }
    }
    out.push_back(std::move(hw));
  }
  return out;
}

inline std::vector<Hotword> load_hotwords(const std::string& path) {
  auto in = io::open_input(path);
  return parse_hotwords(in, path);
}

inline void write_hotwords(std::ostream& out,
                           std::span<const Hotword> hotwords) {
  for (const auto& hw : hotwords) out << hotword_to_json(hw).dump() << '\n';
}

}  // namespace triebias
