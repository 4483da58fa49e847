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

#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "triebias/metrics.hpp"

namespace triebias {
namespace {

using Words = std::vector<std::string>;
using BiasSet = std::set<std::string, std::less<>>;

std::string kinds(const AlignmentReport& r) {
  std::string s;
  for (const auto& op : r.ops) s += "MSDI"[static_cast<int>(op.kind)];
  return s;
}

Words random_words(std::mt19937& rng, int max_len) {
  static const char* alphabet[] = {"a", "b", "c"};
  Words w(rng() % (max_len + 1));
  for (auto& x : w) x = alphabet[rng() % 3];
  return w;
}

TEST(AlignTest, SubstitutionThenInsertion) {
  const Words ref{"start", "acme", "end"};
  const Words hyp{"start", "ak", "me", "end"};
  const auto r = align(ref, hyp);
  EXPECT_EQ(kinds(r), "MSIM");
  EXPECT_EQ(r.ops[1].ref, "acme");
  EXPECT_EQ(r.ops[1].hyp, "ak");
  EXPECT_EQ(r.ops[2].hyp, "me");
  EXPECT_EQ(r.counts.errors(), 2);
}

TEST(AlignTest, EmptySides) {
  EXPECT_EQ(kinds(align(Words{}, Words{})), "");
  EXPECT_EQ(kinds(align(Words{"a", "b"}, Words{})), "DD");
  EXPECT_EQ(kinds(align(Words{}, Words{"a"})), "I");
}

TEST(AlignTest, AgreesWithExhaustiveEnumeration) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 400; ++trial) {
    const auto ref = random_words(rng, 5);
    const auto hyp = random_words(rng, 5);
    const auto r = align(ref, hyp);
    EXPECT_EQ(r.counts.errors(), oracle::edit_distance(ref, hyp));
    EXPECT_EQ(kinds(r), oracle::brute_force_alignment(ref, hyp));
    Words ref_back, hyp_back;
    for (const auto& op : r.ops) {
      if (op.kind != EditKind::kIns) ref_back.push_back(op.ref);
      if (op.kind != EditKind::kDel) hyp_back.push_back(op.hyp);
    }
    EXPECT_EQ(ref_back, ref);
    EXPECT_EQ(hyp_back, hyp);
  }
}

TEST(ScoreTest, BiasedWordSplit) {
  const Words ref{"start", "acme", "end"};
  const Words hyp{"start", "ak", "me", "end"};
  const auto b = score(align(ref, hyp), BiasSet{"acme"});
  EXPECT_EQ(b.wer(), (ErrorRate{2, 3}));
  EXPECT_EQ(b.u_wer(), (ErrorRate{1, 2}));
  EXPECT_EQ(b.b_wer(), (ErrorRate{1, 1}));
  EXPECT_EQ(b.wer().percent(), "66.67");
  EXPECT_EQ(b.u_wer().percent(), "50.00");
  EXPECT_EQ(b.b_wer().percent(), "100.00");
}

TEST(ScoreTest, InsertedBiasWordCountsAsBiased) {
  const auto b = score(align(Words{"the", "cat"}, Words{"the", "acme", "cat"}),
                       BiasSet{"acme"});
  EXPECT_EQ(b.biased.ins, 1);
  EXPECT_EQ(b.u_wer(), (ErrorRate{0, 2}));
  EXPECT_EQ(b.b_wer(), (ErrorRate{1, 0}));
  EXPECT_FALSE(b.b_wer().defined());
  EXPECT_EQ(b.b_wer().percent(), "undefined");
}

TEST(ScoreTest, DecompositionAndEmptyBiasSet) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ref = random_words(rng, 8);
    const auto hyp = random_words(rng, 8);
    const auto r = align(ref, hyp);
    const auto b = score(r, BiasSet{"b"});
    EXPECT_EQ(b.u_wer().errors + b.b_wer().errors, r.counts.errors());
    EXPECT_EQ(b.u_wer().words + b.b_wer().words,
              static_cast<std::int64_t>(ref.size()));
    EXPECT_EQ(b.b_wer().words, std::count(ref.begin(), ref.end(), "b"));
    const auto plain = score(r, BiasSet{});
    EXPECT_EQ(plain.u_wer(), plain.wer());
    EXPECT_EQ(plain.b_wer(), (ErrorRate{0, 0}));
  }
}

TEST(ScoreTest, ErrorRateConventions) {
  EXPECT_EQ((ErrorRate{0, 0}).value(), 0.0);
  EXPECT_EQ((ErrorRate{0, 0}).percent(), "0.00");
  EXPECT_TRUE(std::isinf((ErrorRate{3, 0}).value()));
  EXPECT_EQ((ErrorRate{1, 8}).percent(), "12.50");
}

TEST(ScoreTest, AggregationIsMicroAveraged) {
  const BiasSet bias{"acme"};
  std::vector<WerBreakdown> per_utt{
      score(align(Words{"acme"}, Words{"ak"}), bias),
      score(align(Words(9, "x"), Words(9, "x")), bias),
  };
  const auto total = aggregate(per_utt);
  EXPECT_EQ(total.wer(), (ErrorRate{1, 10}));
  EXPECT_EQ(total.wer().percent(), "10.00");
  EXPECT_EQ(total.b_wer(), (ErrorRate{1, 1}));
  EXPECT_EQ(total.u_wer(), (ErrorRate{0, 9}));
}

}  // namespace
}  // namespace triebias
