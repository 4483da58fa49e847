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

// Deterministic n-gram table scorer used as a test model.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triebias/error.hpp"
#include "triebias/io.hpp"
#include "triebias/scorer.hpp"

namespace triebias {

/// Next-token probabilities keyed by context suffix.
///
/// JSON form:
///   {"order": k, "floor_logprob": f, "vocab_size": n,
///    "rows": [{"context": [ids], "probs": {"<id>": p, ...}}, ...],
///    "audio": {"<audio-id>": {<table>}, ...}}
/// The longest context suffix with a row wins. Tokens absent from the row
/// score `floor_logprob`. `vocab_size` (optional) lets top-k requests be
/// padded with unlisted ids.
class ToyTable {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ToyTable(int order, double floor_logprob, int vocab_size = 0)
      : order_(order), floor_(floor_logprob), vocab_size_(vocab_size) {
    if (order < 0) throw InputError("table order must be >= 0");
    if (!(floor_logprob <= 0.0)) {
      throw InputError("floor log-probability must be <= 0");
    }
  }

  /// Throws InputError unless the row is a distribution within tolerance.
  void set_row(const TokenSequence& context,
               const std::map<TokenId, double>& probs) {
    if (static_cast<int>(context.size()) > order_) {
      throw InputError("context longer than table order");
    }
    double sum = 0.0;
    for (const auto& [tok, p] : probs) {
      if (!(p > 0.0 && p <= 1.0)) {
        throw InputError("probability for token " + std::to_string(tok) +
                         " outside (0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InputError("row does not sum to 1 (sum " + std::to_string(sum) +
                       ")");
    }
    std::vector<std::pair<TokenId, double>> row;
    for (const auto& [tok, p] : probs) row.emplace_back(tok, std::log(p));
    std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
    if (!rows_.emplace(context, std::move(row)).second) {
      throw InputError("duplicate context in table");
    }
  }

  int order() const { return order_; }
  double floor_logprob() const { return floor_; }

  double logprob(std::span<const TokenId> history, TokenId token) const {
    const auto* row = lookup(history);
    if (row) {
      for (const auto& [tok, lp] : *row) {
        if (tok == token) return lp;
      }
    }
    return floor_;
  }

  StepScores score(const StepRequest::Item& item, int topk) const {
    StepScores out;
    out.id = item.id;
    const auto* row = lookup(item.tokens);
    int taken = 0;
    if (row) {
      for (const auto& [tok, lp] : *row) {
        if (taken >= topk) break;
        out.scores[tok] = lp;
        ++taken;
      }
    }
    for (TokenId t = 0; t < vocab_size_ && taken < topk; ++t) {
      if (out.scores.count(t)) continue;
      bool listed = false;
      if (row) {
        listed = std::any_of(row->begin(), row->end(),
                             [&](const auto& e) { return e.first == t; });
      }
      if (listed) continue;
      out.scores[t] = floor_;
      ++taken;
    }
    for (TokenId t : item.need) {
      if (!out.scores.count(t)) out.scores[t] = logprob(item.tokens, t);
    }
    return out;
  }

 private:
  using Row = std::vector<std::pair<TokenId, double>>;

  const Row* lookup(std::span<const TokenId> history) const {
    const int max_len =
        std::min<int>(order_, static_cast<int>(history.size()));
    for (int len = max_len; len >= 0; --len) {
      TokenSequence ctx(history.end() - len, history.end());
      auto it = rows_.find(ctx);
      if (it != rows_.end()) return &it->second;
    }
    return nullptr;
  }

  int order_;
  double floor_;
  int vocab_size_;
  std::map<TokenSequence, Row> rows_;
};

inline ToyTable parse_toy_table(const nlohmann::json& j) {
  try {
    ToyTable table(j.value("order", 0), j.value("floor_logprob", -30.0),
                   j.value("vocab_size", 0));
    for (const auto& row : j.at("rows")) {
      std::map<TokenId, double> probs;
      for (const auto& [key, value] : row.at("probs").items()) {
        TokenId id = 0;
        try {
          id = wire::parse_token_key(key);
        } catch (const ProtocolError&) {
          throw InputError("bad token key '" + key + "' in table");
        }
        probs[id] = value.get<double>();
      }
      table.set_row(row.value("context", TokenSequence{}), probs);
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed table: ") + e.what());
  }
}

/// In-process scorer over toy tables; sessions pick a table by audio id.
class ToyTableScorer : public StepScorer {
 public:
  explicit ToyTableScorer(ToyTable table) : default_(std::move(table)) {}

  void add_audio_table(std::string audio, ToyTable table) {
    by_audio_.insert_or_assign(std::move(audio), std::move(table));
  }

  const ToyTable& table_for(const std::string& audio) const {
    auto it = by_audio_.find(audio);
    return it == by_audio_.end() ? default_ : it->second;
  }

  std::unique_ptr<ScorerSession> open(const std::string&,
                                      const std::string& audio) override {
    return std::make_unique<Session>(table_for(audio));
  }

  bool concurrent_sessions() const override { return true; }

 private:
  class Session : public ScorerSession {
   public:
    explicit Session(const ToyTable& table) : table_(table) {}
    std::vector<StepScores> step(const StepRequest& req) override {
      std::vector<StepScores> out;
      out.reserve(req.hyps.size());
      for (const auto& h : req.hyps) out.push_back(table_.score(h, req.topk));
      return out;
    }

   private:
    const ToyTable& table_;
  };

  ToyTable default_;
  std::map<std::string, ToyTable> by_audio_;
};

inline std::unique_ptr<ToyTableScorer> load_toy_table_scorer(
    const std::string& path) {
  auto in = io::open_input(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  try {
    auto scorer = std::make_unique<ToyTableScorer>(parse_toy_table(j));
    if (j.contains("audio")) {
      for (const auto& [audio, sub] : j.at("audio").items()) {
        scorer->add_audio_table(audio, parse_toy_table(sub));
      }
    }
    return scorer;
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace triebias
