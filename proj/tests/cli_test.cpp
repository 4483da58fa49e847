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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "triebias/bias_trie.hpp"
#include "triebias/bias_list.hpp"

namespace triebias {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("triebias_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path file(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliRun run(const std::string& args) {
    CliRun r;
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(TRIEBIAS_CLI) + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  // " start kay lith end" is the model's choice; " start ka el ith end"
  // is the canonical tokenization of the hotword.
  void write_decode_inputs() {
    file("vocab.tsv",
         "#special: 0\n0\t\"<|endoftext|>\"\n1\t\" start\"\n2\t\" kay\"\n"
         "3\t\"lith\"\n4\t\" end\"\n5\t\" ka\"\n6\t\"el\"\n7\t\"ith\"\n");
    file("table.json", R"({"order": 2, "floor_logprob": -30, "rows": [
      {"context": [], "probs": {"1": 0.9, "4": 0.1}},
      {"context": [4], "probs": {"0": 1.0}},
      {"context": [1], "probs": {"2": 0.6, "5": 0.4}},
      {"context": [1, 2], "probs": {"3": 1.0}},
      {"context": [1, 5], "probs": {"6": 1.0}},
      {"context": [5, 6], "probs": {"7": 1.0}},
      {"context": [2, 3], "probs": {"4": 0.9, "0": 0.1}},
      {"context": [6, 7], "probs": {"4": 1.0}},
      {"context": [3, 4], "probs": {"0": 1.0}},
      {"context": [7, 4], "probs": {"0": 1.0}}]})");
    file("manifest.tsv", "u1\ta1\nu2\ta2\nu3\ta3\n");
    file("hotwords.jsonl",
         R"({"id": 0, "text": "Kaelith", "canonical": [5, 6, 7]})" "\n");
    file("empty.jsonl", "");
  }
  std::string decode_args(const std::string& extra) {
    return "decode --toy-table " + path("table.json") + " --vocab " +
           path("vocab.tsv") + " --manifest " + path("manifest.tsv") +
           " --beam-size 4 --max-len 8 --end-token 0 " + extra;
  }

  fs::path dir_;
};

TEST_F(CliTest, DecodeBiasingRewritesTheHotword) {
  write_decode_inputs();
  auto r = run(decode_args("--out " + path("plain.tsv")));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "plain.tsv"),
            "u1\tstart kaylith end\nu2\tstart kaylith end\nu3\tstart kaylith end\n");
  r = run(decode_args("--hotwords " + path("hotwords.jsonl") + " --out " +
                      path("biased.tsv") + " --commits " + path("commits.jsonl")));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "biased.tsv").substr(0, 21), "u1\tstart Kaelith end\n");
  std::istringstream commits(slurp(dir_ / "commits.jsonl"));
  std::string line;
  ASSERT_TRUE(std::getline(commits, line));
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("tokens"), nlohmann::json::parse("[1, 5, 6, 7, 4]"));
  EXPECT_EQ(j.at("reward"), 3);
  EXPECT_EQ(j.at("complete"), true);
}

TEST_F(CliTest, EmptyHotwordFileEqualsNoBiasing) {
  write_decode_inputs();
  ASSERT_EQ(run(decode_args("--out " + path("a.tsv"))).status, 0);
  ASSERT_EQ(run(decode_args("--hotwords " + path("empty.jsonl") + " --out " +
                            path("b.tsv")))
                .status,
            0);
  EXPECT_EQ(slurp(dir_ / "a.tsv"), slurp(dir_ / "b.tsv"));
}

TEST_F(CliTest, DecodeOutputIsDeterministicAcrossWorkersAndScorers) {
  write_decode_inputs();
  const std::string hw = "--hotwords " + path("hotwords.jsonl") + " ";
  ASSERT_EQ(run(decode_args(hw + "--out " + path("w1.tsv"))).status, 0);
  ASSERT_EQ(run(decode_args(hw + "--workers 3 --out " + path("w3.tsv"))).status, 0);
  const std::string bridged =
      "decode --scorer-cmd '" + std::string(TRIEBIAS_CLI) + " serve-table --table " +
      path("table.json") + "' --vocab " + path("vocab.tsv") + " --manifest " +
      path("manifest.tsv") + " --beam-size 4 --max-len 8 --end-token 0 " + hw +
      "--out " + path("bridge.tsv");
  auto r = run(bridged);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "w1.tsv"), slurp(dir_ / "w3.tsv"));
  EXPECT_EQ(slurp(dir_ / "w1.tsv"), slurp(dir_ / "bridge.tsv"));
}

TEST_F(CliTest, BrokenBridgeIsAProtocolFailure) {
  write_decode_inputs();
  const auto r = run("decode --scorer-cmd 'echo not-json' --vocab " +
                     path("vocab.tsv") + " --manifest " + path("manifest.tsv") +
                     " --end-token 0 --out " + path("x.tsv"));
  EXPECT_EQ(r.status, 3);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, InputErrorsExitWithTwo) {
  write_decode_inputs();
  EXPECT_EQ(run("decode --bogus").status, 2);
  EXPECT_EQ(run("").status, 2);
  auto r = run(decode_args("--hotwords " + path("missing.jsonl") + " --out " +
                           path("x.tsv")));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("missing.jsonl"), std::string::npos) << r.err;
  file("bad_hw.jsonl", R"({"id": 0, "text": "x", "canonical": [99]})" "\n");
  EXPECT_EQ(run(decode_args("--hotwords " + path("bad_hw.jsonl") + " --out " +
                            path("x.tsv")))
                .status,
            2);
}

TEST_F(CliTest, ExtractVariantsOnFixture) {
  const std::string fx = std::string(TRIEBIAS_FIXTURES) + "/extract/";
  auto r = run("extract-variants --transcripts " + fx + "transcripts.jsonl" +
               " --markers " + fx + "markers.json --hotwords " + fx +
               "hotwords.jsonl --vocab " + fx + "vocab.tsv --out " +
               path("out.jsonl") + " --report " + path("report.tsv"));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(load_hotwords(path("out.jsonl")), load_hotwords(fx + "expected.jsonl"));
  EXPECT_NE(slurp(dir_ / "report.tsv").find("hotword"), std::string::npos);

  r = run("extract-variants --transcripts " + fx + "transcripts.jsonl" +
          " --markers " + path("nope.json") + " --hotwords " + fx +
          "hotwords.jsonl --vocab " + fx + "vocab.tsv --out " + path("o.jsonl"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos);
}

TEST_F(CliTest, BiasListsAreReproducible) {
  std::string freq;
  for (int i = 0; i < 40; ++i) freq += "w" + std::to_string(i) + "\t" + std::to_string(100 - i) + "\n";
  file("freq.tsv", freq);
  file("refs.tsv", "u1\tw0 w35 w36\nu2\tw1 w2\n");
  const std::string args = "make-biaslist --freq " + path("freq.tsv") + " --refs " +
                           path("refs.tsv") + " --cutoff 10 -N 5 --seed 9 --out ";
  ASSERT_EQ(run(args + path("a.jsonl")).status, 0);
  ASSERT_EQ(run(args + path("b.jsonl")).status, 0);
  EXPECT_EQ(slurp(dir_ / "a.jsonl"), slurp(dir_ / "b.jsonl"));
  const auto lists = load_bias_lists(path("a.jsonl"));
  ASSERT_EQ(lists.size(), 2u);
  EXPECT_EQ(lists[0].targets, (std::vector<std::string>{"w35", "w36"}));
  EXPECT_EQ(lists[0].distractors.size(), 5u);
  EXPECT_TRUE(lists[1].targets.empty());

  const auto r = run("make-biaslist --freq " + path("freq.tsv") + " --refs " +
                     path("refs.tsv") + " --cutoff 10 -N 100 --out " + path("c.jsonl"));
  EXPECT_EQ(r.status, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, ScoreTable) {
  file("refs.tsv", "u1\tstart acme end\nu2\tthe cat\n");
  file("hyps.tsv", "u1\tstart ak me end\nu2\tthe cat\n");
  file("bias.jsonl", R"({"utt": "u1", "targets": ["acme"], "distractors": []})"
                     "\n" R"({"utt": "u2", "targets": [], "distractors": ["zebra"]})" "\n");
  auto r = run("score --refs " + path("refs.tsv") + " --hyps " + path("hyps.tsv") +
               " --biaslist " + path("bias.jsonl") + " --out " + path("s.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "WER\tU-WER\tB-WER\n40.00\t25.00\t100.00\n");

  file("hyps_bad.tsv", "u1\tstart acme end\nu9\tthe cat\n");
  r = run("score --refs " + path("refs.tsv") + " --hyps " + path("hyps_bad.tsv") +
          " --biaslist " + path("bias.jsonl"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("u9"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace triebias
