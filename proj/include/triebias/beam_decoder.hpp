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

// Beam search with trie-reward shallow fusion.
//
// Hypotheses are ranked by
//
//   fused = sum(log P(token | prefix)) + reward_scale * trie_reward
//
// (higher is better). The trie reward never touches the model scores, so a
// hypothesis that never enters the trie ranks exactly as it would without
// biasing.

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triebias/bias_trie.hpp"
#include "triebias/error.hpp"
#include "triebias/scorer.hpp"
#include "triebias/token_core.hpp"

namespace triebias {

struct DecodeConfig {
  int beam_size = 10;
  int max_len = 224;  // decoding steps, end token included
  int candidates_per_beam = 10;
  bool length_normalization = false;
  double reward_scale = 1.0;
  TokenId end_token = -1;

  void validate() const {
    if (beam_size < 1) throw InputError("beam_size must be positive");
    if (max_len < 1) throw InputError("max_len must be positive");
    if (candidates_per_beam < beam_size) {
      throw InputError("candidates_per_beam must be >= beam_size");
    }
    if (end_token < 0) throw InputError("end token is not set");
  }
};

struct Hypothesis {
  TokenSequence tokens;  // content tokens; the end token is not stored
  double model_logprob = 0.0;
  int reward = 0;
  TrieCursor cursor;
  std::vector<Match> commits;
  bool finished = false;

  double fused_score(double reward_scale) const {
    if (reward == 0) return model_logprob;
    return model_logprob + reward_scale * static_cast<double>(reward);
  }

  /// Decoding steps taken, counting the end token once finished.
  std::size_t steps() const { return tokens.size() + (finished ? 1 : 0); }
};

/// Strict ordering: higher fused score, then fewer tokens, then
/// lexicographically smaller token ids.
inline bool ranks_before(const Hypothesis& a, double score_a,
                         const Hypothesis& b, double score_b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.tokens.size() != b.tokens.size()) {
    return a.tokens.size() < b.tokens.size();
  }
  return a.tokens < b.tokens;
}

struct DecodeResult {
  Hypothesis best;
  bool complete = true;  // false when no hypothesis finished within max_len
  std::string rewritten_text;
  std::vector<Hypothesis> all_beams;
};

/// Feeds `token` to `hyp` as content: bookkeeping for score, trie reward
/// and commits.
inline void extend(Hypothesis& hyp, const BiasTrie& trie, TokenId token,
                   double logprob) {
  hyp.model_logprob += logprob;
  auto out = advance(trie, hyp.cursor, token, hyp.tokens.size());
  hyp.tokens.push_back(token);
  hyp.reward += out.reward_delta;
  hyp.cursor = out.cursor;
  if (out.committed) record_commit(hyp.commits, *out.committed);
}

inline void finish(Hypothesis& hyp, double end_logprob) {
  hyp.model_logprob += end_logprob;
  hyp.reward += finalize(hyp.cursor);
  hyp.finished = true;
}

/// Detokenized text with each committed span replaced by the canonical
/// spelling of its hotword. Whitespace around the span surface is kept.
inline std::string rewrite(const Hypothesis& hyp,
                           std::span<const Hotword> hotwords,
                           const Vocabulary& vocab) {
  std::unordered_map<int, const Hotword*> by_id;
  for (const auto& hw : hotwords) by_id[hw.id] = &hw;
  std::span<const TokenId> toks(hyp.tokens);
  std::string out;
  std::size_t pos = 0;
  for (const auto& m : hyp.commits) {
    auto it = by_id.find(m.hotword_id);
    if (it == by_id.end()) {
      throw InputError("commit references unknown hotword " +
                       std::to_string(m.hotword_id));
    }
    if (m.begin < pos || m.end > toks.size() || m.begin >= m.end) {
      throw InputError("commit spans overlap or fall outside the hypothesis");
    }
    out += detokenize(toks.subspan(pos, m.begin - pos), vocab);
    const std::string surface =
        detokenize(toks.subspan(m.begin, m.end - m.begin), vocab);
    const auto lead = surface.find_first_not_of(" \t\n");
    const auto trail = surface.find_last_not_of(" \t\n");
    if (lead == std::string::npos) {
      out += surface + it->second->canonical_text;
    } else {
      out += surface.substr(0, lead);
      out += it->second->canonical_text;
      out += surface.substr(trail + 1);
    }
    pos = m.end;
  }
  out += detokenize(toks.subspan(pos), vocab);
  return out;
}

/// Runs one utterance. Every step sends a single batched request covering
/// all live hypotheses. For each hypothesis the candidates are the scorer's
/// top `candidates_per_beam` tokens (the end token competes with the rest)
/// plus every token continuing its trie cursor, which is force-scored.
///
/// Extensions are scanned best first until `beam_size` live ones are kept;
/// finished ones met on the way move to a separate pool. Search stops once
/// `beam_size` hypotheses have finished, no live hypothesis is left, or
/// `max_len` steps have run. If nothing finished, the best live hypothesis
/// is returned with `complete` unset.
inline DecodeResult decode(ScorerSession& scorer, const BiasTrie& trie,
                           std::span<const Hotword> hotwords,
                           const Vocabulary& vocab, const DecodeConfig& cfg,
                           const std::string& session = "") {
  cfg.validate();
  if (!vocab.contains(cfg.end_token)) {
    throw InputError("end token " + std::to_string(cfg.end_token) +
                     " is not in the vocabulary");
  }
  const double scale = cfg.reward_scale;
  auto by_rank = [scale](const Hypothesis& a, const Hypothesis& b) {
    return ranks_before(a, a.fused_score(scale), b, b.fused_score(scale));
  };

  std::vector<Hypothesis> beam(1);
  std::vector<Hypothesis> finished;
  for (int step = 0; step < cfg.max_len && !beam.empty(); ++step) {
    StepRequest req;
    req.session = session;
    req.topk = cfg.candidates_per_beam;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      StepRequest::Item item;
      item.id = static_cast<int>(i);
      item.tokens = beam[i].tokens;
      for (const auto& arc : trie.arcs(beam[i].cursor.node)) {
        item.need.push_back(arc.token);
      }
      req.hyps.push_back(std::move(item));
    }
    const auto scores = scorer.step(req);
    validate_scores(req, scores);

    std::vector<Hypothesis> candidates;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const auto& hyp = beam[i];
      std::vector<std::pair<TokenId, double>> ranked;
      for (const auto& [tok, lp] : scores[i].scores) {
        if (tok != cfg.end_token && vocab.is_special(tok)) continue;
        ranked.emplace_back(tok, lp);
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) {
                         return a.second > b.second;
                       });
      if (ranked.size() > static_cast<std::size_t>(cfg.candidates_per_beam)) {
        ranked.resize(cfg.candidates_per_beam);
      }
      for (const TokenId t : req.hyps[i].need) {
        if (std::none_of(ranked.begin(), ranked.end(),
                         [t](const auto& e) { return e.first == t; })) {
          ranked.emplace_back(t, scores[i].scores.at(t));
        }
      }
      for (const auto& [tok, lp] : ranked) {
        if (!vocab.contains(tok)) {
          throw ProtocolError("scorer proposed token " + std::to_string(tok) +
                              " outside the vocabulary");
        }
        Hypothesis next = hyp;
        if (tok == cfg.end_token) {
          finish(next, lp);
        } else {
          extend(next, trie, tok, lp);
        }
        candidates.push_back(std::move(next));
      }
    }

    std::sort(candidates.begin(), candidates.end(), by_rank);
    std::vector<Hypothesis> next_beam;
    // On the last step nothing live can finish any more, so every finished
    // extension is kept and the live ones only serve as a fallback.
    const bool last_step = step + 1 == cfg.max_len;
    for (auto& c : candidates) {
      const bool beam_full =
          next_beam.size() == static_cast<std::size_t>(cfg.beam_size);
      if (beam_full && !last_step) break;
      if (c.finished) {
        finished.push_back(std::move(c));
      } else if (!beam_full) {
        next_beam.push_back(std::move(c));
      }
    }
    beam = std::move(next_beam);
    if (finished.size() >= static_cast<std::size_t>(cfg.beam_size)) break;
  }

  DecodeResult result;
  const auto& pool = finished.empty() ? beam : finished;
  result.complete = !finished.empty();
  if (pool.empty()) throw ProtocolError("decoding produced no hypotheses");
  auto final_score = [&](const Hypothesis& h) {
    double s = h.fused_score(scale);
    if (cfg.length_normalization && h.steps() > 0) {
      s /= static_cast<double>(h.steps());
    }
    return s;
  };
  const Hypothesis* best = &pool.front();
  for (const auto& h : pool) {
    if (ranks_before(h, final_score(h), *best, final_score(*best))) best = &h;
  }
  result.best = *best;
  result.rewritten_text = rewrite(result.best, hotwords, vocab);
  result.all_beams = finished;
  result.all_beams.insert(result.all_beams.end(), beam.begin(), beam.end());
  std::sort(result.all_beams.begin(), result.all_beams.end(), by_rank);
  return result;
}

}  // namespace triebias
