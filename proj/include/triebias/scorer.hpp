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

// Next-token scorer interface and its JSON-lines wire protocol.
//
//   -> {"type":"begin","session":s,"audio":a}
//   -> {"type":"step","session":s,"hyps":[{"id":i,"tokens":[...]}],
//       "need":[[...],...],"topk":k}
//   <- {"type":"scores","session":s,"hyps":[{"id":i,"scores":{"<tok>":lp}}]}
//   -> {"type":"end","session":s}
//
// A server answers a malformed request with {"type":"error","message":m}.
// All log-probabilities are natural logs.

#pragma once

#include <climits>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "triebias/error.hpp"
#include "triebias/io.hpp"
#include "triebias/token_core.hpp"

namespace triebias {

struct StepRequest {
  struct Item {
    int id = 0;
    TokenSequence tokens;
    std::vector<TokenId> need;  // must be scored no matter how unlikely
  };
  std::string session;
  std::vector<Item> hyps;
  int topk = 0;
};

/// Log-probabilities for one hypothesis extension step.
struct StepScores {
  int id = 0;
  std::map<TokenId, double> scores;
};

class ScorerSession {
 public:
  virtual ~ScorerSession() = default;
  /// One call per decoding step for all live hypotheses; the reply must be
  /// order-aligned with `req.hyps`.
  virtual std::vector<StepScores> step(const StepRequest& req) = 0;
};

class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::unique_ptr<ScorerSession> open(const std::string& session,
                                              const std::string& audio) = 0;
  /// False if sessions must not run at the same time.
  virtual bool concurrent_sessions() const = 0;
};

/// Throws ProtocolError unless `resp` answers `req`: same length and ids in
/// order, every needed token present, every value a finite number <= 0.
inline void validate_scores(const StepRequest& req,
                            const std::vector<StepScores>& resp) {
  if (resp.size() != req.hyps.size()) {
    throw ProtocolError("scorer returned " + std::to_string(resp.size()) +
                        " hypotheses, expected " +
                        std::to_string(req.hyps.size()));
  }
  for (std::size_t i = 0; i < resp.size(); ++i) {
    const auto& want = req.hyps[i];
    const auto& got = resp[i];
    if (got.id != want.id) {
      throw ProtocolError("scorer response out of order at index " +
                          std::to_string(i) + ": id " +
                          std::to_string(got.id) + ", expected " +
                          std::to_string(want.id));
    }
    for (const auto& [tok, lp] : got.scores) {
      if (!std::isfinite(lp) || lp > 0.0) {
        throw ProtocolError("hypothesis " + std::to_string(got.id) +
                            ": invalid log-probability for token " +
                            std::to_string(tok));
      }
    }
    for (TokenId t : want.need) {
      if (!got.scores.count(t)) {
        throw ProtocolError("hypothesis " + std::to_string(got.id) +
                            ": requested token " + std::to_string(t) +
                            " missing from scores");
      }
    }
  }
}

namespace wire {

using nlohmann::json;

inline json begin_message(const std::string& session, const std::string& audio) {
  return {{"type", "begin"}, {"session", session}, {"audio", audio}};
}

inline json end_message(const std::string& session) {
  return {{"type", "end"}, {"session", session}};
}

inline json step_message(const StepRequest& req) {
  json hyps = json::array();
  json need = json::array();
  for (const auto& h : req.hyps) {
    hyps.push_back({{"id", h.id}, {"tokens", h.tokens}});
    need.push_back(h.need);
  }
  return {{"type", "step"},
          {"session", req.session},
          {"hyps", std::move(hyps)},
          {"need", std::move(need)},
          {"topk", req.topk}};
}

inline json scores_message(const std::string& session,
                           const std::vector<StepScores>& scores) {
  json hyps = json::array();
  for (const auto& s : scores) {
    json m = json::object();
    for (const auto& [tok, lp] : s.scores) m[std::to_string(tok)] = lp;
    hyps.push_back({{"id", s.id}, {"scores", std::move(m)}});
  }
  return {{"type", "scores"}, {"session", session}, {"hyps", std::move(hyps)}};
}

inline json error_message(const std::string& what) {
  return {{"type", "error"}, {"message", what}};
}

inline TokenId parse_token_key(const std::string& key) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(key, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != key.size() || key.empty() || v < 0 || v > INT32_MAX) {
    throw ProtocolError("bad token key '" + key + "' in scores");
  }
  return static_cast<TokenId>(v);
}

/// Parses a scores frame; error frames become ProtocolError.
inline std::vector<StepScores> parse_scores(const json& msg,
                                            const std::string& session) {
  try {
    const auto type = msg.at("type").get<std::string>();
    if (type == "error") {
      throw ProtocolError("scorer error: " +
                          msg.value("message", std::string("(no message)")));
    }
    if (type != "scores") {
      throw ProtocolError("expected a scores frame, got '" + type + "'");
    }
    if (msg.contains("session") &&
        msg.at("session").get<std::string>() != session) {
      throw ProtocolError("scores frame for session '" +
                          msg.at("session").get<std::string>() +
                          "', expected '" + session + "'");
    }
    std::vector<StepScores> out;
    for (const auto& h : msg.at("hyps")) {
      StepScores s;
      s.id = h.at("id").get<int>();
      for (const auto& [key, value] : h.at("scores").items()) {
        if (!value.is_number()) {
          throw ProtocolError("non-numeric score for token " + key);
        }
        s.scores[parse_token_key(key)] = value.get<double>();
      }
      out.push_back(std::move(s));
    }
    return out;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed scores frame: ") + e.what());
  }
}

/// Server-side parse of a step frame.
inline StepRequest parse_step(const json& msg) {
  StepRequest req;
  try {
    req.session = msg.value("session", std::string());
    req.topk = msg.at("topk").get<int>();
    const auto& hyps = msg.at("hyps");
    const json need = msg.value("need", json::array());
    if (!need.empty() && need.size() != hyps.size()) {
      throw ProtocolError("'need' is not aligned with 'hyps'");
    }
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      StepRequest::Item item;
      item.id = hyps[i].at("id").get<int>();
      item.tokens = hyps[i].at("tokens").get<TokenSequence>();
      if (!need.empty()) item.need = need[i].get<std::vector<TokenId>>();
      req.hyps.push_back(std::move(item));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed step frame: ") + e.what());
  }
  if (req.topk < 0) throw ProtocolError("negative topk");
  return req;
}

/// Server side of the protocol: one reply (or none) per incoming frame.
/// Malformed frames get an error frame; open sessions are unaffected.
class Server {
 public:
  explicit Server(StepScorer& scorer) : scorer_(scorer) {}

  std::optional<json> handle(const std::string& line) {
    if (io::trim(line).empty()) return std::nullopt;
    try {
      json msg;
      try {
        msg = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("unparseable frame: ") + e.what());
      }
      if (!msg.is_object() || !msg.contains("type") ||
          !msg.at("type").is_string()) {
        throw ProtocolError("frame has no type");
      }
      const auto type = msg.at("type").get<std::string>();
      const auto session = msg.value("session", std::string());
      if (type == "begin") {
        sessions_[session] =
            scorer_.open(session, msg.value("audio", std::string()));
        return std::nullopt;
      }
      if (type == "end") {
        sessions_.erase(session);
        return std::nullopt;
      }
      if (type == "step") {
        auto it = sessions_.find(session);
        if (it == sessions_.end()) {
          throw ProtocolError("step for unknown session '" + session + "'");
        }
        const auto req = parse_step(msg);
        return scores_message(session, it->second->step(req));
      }
      throw ProtocolError("unknown frame type '" + type + "'");
    } catch (const std::exception& e) {
      ++errors_;
      return error_message(e.what());
    }
  }

  std::size_t errors() const { return errors_; }
  std::size_t open_sessions() const { return sessions_.size(); }

 private:
  StepScorer& scorer_;
  std::unordered_map<std::string, std::unique_ptr<ScorerSession>> sessions_;
  std::size_t errors_ = 0;
};

/// Serves frames from `in` until end of input. Returns the number of error
/// frames written.
inline std::size_t serve(StepScorer& scorer, std::istream& in,
                         std::ostream& out) {
  Server server(scorer);
  std::string line;
  while (std::getline(in, line)) {
    if (auto reply = server.handle(line)) out << reply->dump() << '\n' << std::flush;
  }
  return server.errors();
}

}  // namespace wire

/// Bidirectional line transport (a pipe to a bridge process, or an in-memory
/// fake in tests).
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// nullopt on end of stream.
  virtual std::optional<std::string> read_line() = 0;
};

/// Client side of the wire protocol over a LineChannel. Sessions are
/// serialized on the channel.
class WireScorer : public StepScorer {
 public:
  explicit WireScorer(std::unique_ptr<LineChannel> channel)
      : channel_(std::move(channel)) {}

  std::unique_ptr<ScorerSession> open(const std::string& session,
                                      const std::string& audio) override {
    std::lock_guard lock(mu_);
    send(wire::begin_message(session, audio));
    return std::make_unique<Session>(*this, session);
  }

  bool concurrent_sessions() const override { return false; }

 private:
  class Session : public ScorerSession {
   public:
    Session(WireScorer& owner, std::string id)
        : owner_(owner), id_(std::move(id)) {}
    ~Session() override {
      try {
        std::lock_guard lock(owner_.mu_);
        owner_.send(wire::end_message(id_));
      } catch (...) {
      }
    }
    std::vector<StepScores> step(const StepRequest& req) override {
      std::lock_guard lock(owner_.mu_);
      owner_.send(wire::step_message(req));
      auto line = owner_.channel_->read_line();
      if (!line) throw ProtocolError("scorer closed the stream");
      nlohmann::json msg;
      try {
        msg = nlohmann::json::parse(*line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("unparseable scorer reply: ") +
                            e.what());
      }
      return wire::parse_scores(msg, id_);
    }

   private:
    WireScorer& owner_;
    std::string id_;
  };

  void send(const nlohmann::json& j) { channel_->write_line(j.dump()); }

  std::unique_ptr<LineChannel> channel_;
  std::mutex mu_;
};

}  // namespace triebias
