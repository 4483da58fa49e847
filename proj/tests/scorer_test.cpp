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

#include <cmath>
#include <deque>
#include <sstream>

#include "gtest/gtest.h"
#include "triebias/scorer.hpp"
#include "triebias/table_scorer.hpp"

namespace triebias {
namespace {

ToyTable uniform3() {
  ToyTable t(0, -30.0, 3);
  t.set_row({}, {{0, 1.0 / 3}, {1, 1.0 / 3}, {2, 1.0 / 3}});
  return t;
}

TEST(ToyTableTest, UniformRow) {
  auto t = uniform3();
  StepRequest::Item item{0, {1, 2}, {}};
  auto s = t.score(item, 3);
  ASSERT_EQ(s.scores.size(), 3u);
  for (const auto& [tok, lp] : s.scores) EXPECT_DOUBLE_EQ(lp, std::log(1.0 / 3));
}

TEST(ToyTableTest, OrderOneLookupAndFloor) {
  ToyTable t(1, -25.0);
  t.set_row({}, {{0, 0.5}, {1, 0.5}});
  t.set_row({1}, {{1, 0.9}, {0, 0.1}});
  EXPECT_DOUBLE_EQ(t.logprob(TokenSequence{0, 1}, 1), std::log(0.9));
  EXPECT_DOUBLE_EQ(t.logprob(TokenSequence{1, 0}, 1), std::log(0.5));
  EXPECT_DOUBLE_EQ(t.logprob(TokenSequence{1}, 7), -25.0);

  StepRequest::Item item{4, {1}, {7}};
  auto s = t.score(item, 1);
  EXPECT_EQ(s.id, 4);
  EXPECT_EQ(s.scores.size(), 2u);
  EXPECT_DOUBLE_EQ(s.scores.at(1), std::log(0.9));
  EXPECT_DOUBLE_EQ(s.scores.at(7), -25.0);
}

TEST(ToyTableTest, TopkPadsWithUnlistedIds) {
  ToyTable t(0, -20.0, 4);
  t.set_row({}, {{2, 1.0}});
  auto s = t.score({0, {}, {}}, 3);
  EXPECT_EQ(s.scores.size(), 3u);
  EXPECT_DOUBLE_EQ(s.scores.at(2), 0.0);
  EXPECT_DOUBLE_EQ(s.scores.at(0), -20.0);
  EXPECT_DOUBLE_EQ(s.scores.at(1), -20.0);
}

TEST(ToyTableTest, RejectsBadTables) {
  ToyTable t(1, -10.0);
  EXPECT_THROW(t.set_row({}, {{0, 0.5}, {1, 0.4}}), InputError);
  EXPECT_THROW(t.set_row({1, 2}, {{0, 1.0}}), InputError);
  EXPECT_THROW(t.set_row({}, {{0, 0.0}, {1, 1.0}}), InputError);
  t.set_row({}, {{0, 1.0}});
  EXPECT_THROW(t.set_row({}, {{0, 1.0}}), InputError);
  EXPECT_THROW(ToyTable(1, 0.5), InputError);

  using nlohmann::json;
  EXPECT_THROW(parse_toy_table(json{{"order", 0}}), InputError);
  EXPECT_THROW(parse_toy_table(json::parse(
                   R"({"rows":[{"context":[],"probs":{"x":1.0}}]})")),
               InputError);
  EXPECT_NO_THROW(parse_toy_table(json::parse(
      R"({"rows":[{"context":[],"probs":{"0":0.25,"1":0.75}}]})")));
  // within the 1e-9 tolerance
  EXPECT_NO_THROW(parse_toy_table(json::parse(
      R"({"rows":[{"context":[],"probs":{"0":0.2500000000005,"1":0.75}}]})")));
}

TEST(ToyTableScorerTest, PicksTablePerAudio) {
  ToyTableScorer scorer(uniform3());
  ToyTable other(0, -30.0);
  other.set_row({}, {{1, 1.0}});
  scorer.add_audio_table("b.wav", other);
  StepRequest req;
  req.topk = 1;
  req.hyps.push_back({0, {}, {}});
  auto a = scorer.open("s1", "a.wav")->step(req);
  auto b = scorer.open("s2", "b.wav")->step(req);
  EXPECT_DOUBLE_EQ(a[0].scores.begin()->second, std::log(1.0 / 3));
  EXPECT_DOUBLE_EQ(b[0].scores.at(1), 0.0);
  EXPECT_TRUE(scorer.concurrent_sessions());
}

StepRequest two_hyp_request() {
  StepRequest req;
  req.session = "u1";
  req.topk = 2;
  req.hyps.push_back({0, {}, {2}});
  req.hyps.push_back({1, {0}, {1, 2}});
  return req;
}

TEST(ValidateScoresTest, Violations) {
  auto req = two_hyp_request();
  std::vector<StepScores> ok{{0, {{2, -1.0}}}, {1, {{1, -0.5}, {2, 0.0}}}};
  EXPECT_NO_THROW(validate_scores(req, ok));

  auto short_resp = ok;
  short_resp.pop_back();
  EXPECT_THROW(validate_scores(req, short_resp), ProtocolError);

  auto swapped = ok;
  std::swap(swapped[0], swapped[1]);
  EXPECT_THROW(validate_scores(req, swapped), ProtocolError);

  auto missing = ok;
  missing[1].scores.erase(1);
  EXPECT_THROW(validate_scores(req, missing), ProtocolError);

  auto positive = ok;
  positive[0].scores[2] = 0.1;
  EXPECT_THROW(validate_scores(req, positive), ProtocolError);

  auto nan = ok;
  nan[0].scores[2] = std::nan("");
  EXPECT_THROW(validate_scores(req, nan), ProtocolError);
}

TEST(WireTest, StepFrameRoundTrip) {
  auto req = two_hyp_request();
  const auto msg = wire::step_message(req);
  EXPECT_EQ(msg.at("type"), "step");
  EXPECT_EQ(msg.at("need"), nlohmann::json::parse("[[2],[1,2]]"));
  const auto back = wire::parse_step(msg);
  EXPECT_EQ(back.session, req.session);
  EXPECT_EQ(back.topk, req.topk);
  ASSERT_EQ(back.hyps.size(), 2u);
  EXPECT_EQ(back.hyps[1].tokens, req.hyps[1].tokens);
  EXPECT_EQ(back.hyps[1].need, req.hyps[1].need);
}

TEST(WireTest, ScoresFrameRoundTrip) {
  std::vector<StepScores> scores{{0, {{2, -1.25}}}, {1, {{10, -0.5}}}};
  const auto msg = wire::scores_message("u1", scores);
  EXPECT_EQ(msg.dump(),
            R"({"hyps":[{"id":0,"scores":{"2":-1.25}},{"id":1,"scores":{"10":-0.5}}],"session":"u1","type":"scores"})");
  const auto back = wire::parse_scores(msg, "u1");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].scores, scores[1].scores);
  EXPECT_THROW(wire::parse_scores(msg, "other"), ProtocolError);
  EXPECT_THROW(wire::parse_scores(wire::error_message("boom"), "u1"),
               ProtocolError);
  EXPECT_THROW(
      wire::parse_scores(nlohmann::json::parse(
                             R"({"type":"scores","hyps":[{"id":0,"scores":{"-3":-1}}]})"),
                         ""),
      ProtocolError);
}

TEST(WireTest, ServerAnswersAndSurvivesMalformedFrames) {
  ToyTableScorer scorer(uniform3());
  std::istringstream in(
      R"({"type":"begin","session":"s","audio":"x.wav"})"
      "\n"
      "not json\n"
      R"({"type":"step","session":"s","hyps":[{"id":0,"tokens":[]}],"need":[[2]],"topk":1})"
      "\n"
      R"({"type":"step","session":"nope","hyps":[],"need":[],"topk":1})"
      "\n"
      R"({"type":"end","session":"s"})"
      "\n");
  std::ostringstream out;
  EXPECT_EQ(wire::serve(scorer, in, out), 2u);
  std::istringstream replies(out.str());
  std::string line;
  std::vector<nlohmann::json> frames;
  while (std::getline(replies, line)) frames.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[0].at("type"), "error");
  EXPECT_EQ(frames[1].at("type"), "scores");
  EXPECT_TRUE(frames[1]["hyps"][0]["scores"].contains("2"));
  EXPECT_EQ(frames[2].at("type"), "error");
}

// Client wired directly into an in-process server.
class LoopbackChannel : public LineChannel {
 public:
  explicit LoopbackChannel(StepScorer& scorer) : server_(scorer) {}
  void write_line(const std::string& line) override {
    sent.push_back(line);
    if (auto reply = server_.handle(line)) pending_.push_back(reply->dump());
  }
  std::optional<std::string> read_line() override {
    if (pending_.empty()) return std::nullopt;
    auto line = pending_.front();
    pending_.pop_front();
    return line;
  }
  std::vector<std::string> sent;

 private:
  wire::Server server_;
  std::deque<std::string> pending_;
};

TEST(WireScorerTest, SessionLifecycleOverChannel) {
  ToyTableScorer backend(uniform3());
  auto channel = std::make_unique<LoopbackChannel>(backend);
  auto* raw = channel.get();
  WireScorer client(std::move(channel));
  EXPECT_FALSE(client.concurrent_sessions());
  {
    auto session = client.open("u7", "a.wav");
    StepRequest req;
    req.session = "u7";
    req.topk = 2;
    req.hyps.push_back({0, {1}, {0}});
    auto scores = session->step(req);
    ASSERT_EQ(scores.size(), 1u);
    EXPECT_TRUE(scores[0].scores.count(0));
    validate_scores(req, scores);
  }
  ASSERT_EQ(raw->sent.size(), 3u);
  EXPECT_EQ(nlohmann::json::parse(raw->sent[0]).at("type"), "begin");
  EXPECT_EQ(nlohmann::json::parse(raw->sent[0]).at("audio"), "a.wav");
  EXPECT_EQ(nlohmann::json::parse(raw->sent[2]).at("type"), "end");
}

TEST(WireScorerTest, ErrorFrameBecomesProtocolError) {
  ToyTableScorer backend(uniform3());
  WireScorer client(std::make_unique<LoopbackChannel>(backend));
  auto session = client.open("u1", "");
  StepRequest req;
  req.session = "u1";
  req.topk = -1;
  EXPECT_THROW(session->step(req), ProtocolError);
}

}  // namespace
}  // namespace triebias
