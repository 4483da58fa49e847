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

// triebias: command-line front end for bias lists, variant mining,
// biased decoding and scoring.

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "triebias/process_scorer.hpp"
#include "triebias/triebias.hpp"

namespace {

using namespace triebias;

constexpr const char* kVersion = "0.1.0";
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

void write_run_manifest(const std::string& path, const std::string& command,
                        int argc, char** argv) {
  if (path.empty()) return;
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json j{{"tool", "triebias"},
                   {"version", kVersion},
                   {"command", command},
                   {"argv", std::vector<std::string>(argv, argv + argc)},
                   {"started", stamp}};
  auto out = io::open_output(path);
  out << j.dump(2) << '\n';
}

// make-biaslist

struct BiasListArgs {
  std::string freq, common_list, rare_list, refs, out;
  int distractors = kDefaultDistractors;
  int cutoff = kDefaultCommonCutoff;
  std::uint64_t seed = 0;
};

int run_make_biaslist(const BiasListArgs& a) {
  VocabularySplit split;
  if (!a.freq.empty()) {
    split = load_vocabulary_split(a.freq, a.cutoff);
  } else if (!a.common_list.empty() && !a.rare_list.empty()) {
    split = load_split_lists(a.common_list, a.rare_list);
  } else {
    throw InputError("need --freq or both --common-list and --rare-list");
  }
  const auto refs = io::read_keyed_file(a.refs);
  auto out = io::open_output(a.out);
  std::size_t short_lists = 0;
  std::size_t targets = 0;
  for (const auto& [utt, text] : refs) {
    const auto words = normalized_words(text);
    const auto list =
        build_utterance_list(utt, words, split, a.distractors, a.seed);
    if (list.short_pool) ++short_lists;
    targets += list.targets.size();
    out << bias_list_to_json(list).dump() << '\n';
  }
  if (short_lists > 0) {
    std::cerr << "warning: rare pool smaller than " << a.distractors
              << " for " << short_lists << " utterance(s); took all\n";
  }
  std::cerr << "utterances " << refs.size() << ", common " << split.common.size()
            << ", rare " << split.rare.size() << ", appearing rare words "
            << targets << '\n';
  return 0;
}

// extract-variants

struct ExtractArgs {
  std::string transcripts, markers, hotwords, vocab, out, report;
};

int run_extract_variants(const ExtractArgs& a) {
  const auto vocab = load_vocabulary(a.vocab);
  const auto markers = load_marker_config(a.markers);
  const auto hotwords = load_hotwords(a.hotwords);
  validate_hotwords(hotwords, vocab);
  const auto transcripts = load_transcripts(a.transcripts);
  const auto result = extract_variants(transcripts, markers, hotwords, vocab);

  // Surface variant collisions between hotwords now rather than at decode.
  try {
    build_trie(result.hotwords, RewardScheme::kUniform);
  } catch (const InputError& e) {
    std::cerr << "warning: " << e.what() << '\n';
  }

  auto out = io::open_output(a.out);
  write_hotwords(out, result.hotwords);

  std::ofstream report_file;
  if (!a.report.empty()) report_file = io::open_output(a.report);
  std::ostream& report = a.report.empty() ? std::cerr : report_file;
  report << "hotword\ttranscripts\tmisses\tspans\texact\tunique\tkept\n";
  for (const auto& s : result.stats) {
    report << s.hotword_id << '\t' << s.transcripts << '\t' << s.misses << '\t'
           << s.spans << '\t' << s.exact_matches << '\t' << s.unique_candidates
           << '\t' << s.kept << '\n';
  }
  return 0;
}

// decode

struct DecodeArgs {
  std::string toy_table, scorer_cmd, hotwords, paths = "both", vocab, manifest,
      out, commits, scheme = "uniform";
  int beam_size = 10;
  int candidates = 0;
  int max_len = 224;
  double reward_scale = 1.0;
  bool length_norm = false;
  int end_token = -1;
  int workers = 1;
};

std::string one_line(std::string_view text) {
  std::string s(io::trim(text));
  for (auto& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int run_decode(const DecodeArgs& a) {
  const auto vocab = load_vocabulary(a.vocab);
  std::vector<Hotword> hotwords;
  if (!a.hotwords.empty()) {
    hotwords = select_paths(load_hotwords(a.hotwords),
                            parse_path_selection(a.paths));
  }
  validate_hotwords(hotwords, vocab);
  const auto trie = build_trie(hotwords, parse_reward_scheme(a.scheme));

  DecodeConfig cfg;
  cfg.beam_size = a.beam_size;
  cfg.candidates_per_beam = a.candidates > 0 ? a.candidates : a.beam_size;
  cfg.max_len = a.max_len;
  cfg.reward_scale = a.reward_scale;
  cfg.length_normalization = a.length_norm;
  cfg.end_token = a.end_token >= 0
                      ? a.end_token
                      : vocab.find_special({"<|endoftext|>", "<eot>", "</s>"});
  if (cfg.end_token < 0) {
    throw InputError("no end token: pass --end-token");
  }
  if (!vocab.contains(cfg.end_token)) {
    throw InputError("end token " + std::to_string(cfg.end_token) +
                     " is not in the vocabulary");
  }
  cfg.validate();

  std::unique_ptr<StepScorer> scorer;
  if (!a.toy_table.empty()) {
    scorer = load_toy_table_scorer(a.toy_table);
  } else if (!a.scorer_cmd.empty()) {
    scorer = make_process_scorer(a.scorer_cmd);
  } else {
    throw InputError("need --toy-table or --scorer-cmd");
  }

  const auto utts = io::read_keyed_file(a.manifest);
  std::vector<DecodeResult> results(utts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= utts.size()) return;
      try {
        auto session = scorer->open(utts[i].first, utts[i].second);
        results[i] = decode(*session, trie, hotwords, vocab, cfg,
                            utts[i].first);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = utts.size();
        return;
      }
    }
  };
  const int workers = scorer->concurrent_sessions() ? std::max(1, a.workers) : 1;
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  auto out = io::open_output(a.out);
  std::ofstream commits;
  if (!a.commits.empty()) commits = io::open_output(a.commits);
  std::map<int, const Hotword*> by_id;
  for (const auto& hw : hotwords) by_id[hw.id] = &hw;
  std::size_t incomplete = 0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& r = results[i];
    out << utts[i].first << '\t' << one_line(r.rewritten_text) << '\n';
    if (!r.complete) ++incomplete;
    if (!commits.is_open()) continue;
    nlohmann::json log{{"utt", utts[i].first},
                       {"tokens", r.best.tokens},
                       {"model_logprob", r.best.model_logprob},
                       {"reward", r.best.reward},
                       {"fused", r.best.fused_score(cfg.reward_scale)},
                       {"complete", r.complete},
                       {"commits", nlohmann::json::array()}};
    for (const auto& m : r.best.commits) {
      const std::span<const TokenId> toks(r.best.tokens);
      log["commits"].push_back(
          {{"hotword", m.hotword_id},
           {"text", by_id.at(m.hotword_id)->canonical_text},
           {"begin", m.begin},
           {"end", m.end},
           {"surface",
            detokenize(toks.subspan(m.begin, m.end - m.begin), vocab)}});
    }
    commits << log.dump() << '\n';
  }
  if (incomplete > 0) {
    std::cerr << "warning: " << incomplete
              << " utterance(s) hit --max-len without finishing\n";
  }
  return 0;
}

// score

struct ScoreArgs {
  std::string refs, hyps, biaslist, out, per_utt;
};

int run_score(const ScoreArgs& a) {
  const auto refs = io::read_keyed_file(a.refs);
  const auto hyps_rows = io::read_keyed_file(a.hyps);
  std::map<std::string, std::string> hyps(hyps_rows.begin(), hyps_rows.end());
  std::map<std::string, std::set<std::string, std::less<>>> bias;
  for (const auto& l : load_bias_lists(a.biaslist)) {
    const auto full = l.full();
    bias[l.utterance_id] = {full.begin(), full.end()};
  }

  std::vector<std::string> mismatched;
  std::set<std::string> ref_ids;
  for (const auto& [utt, _] : refs) {
    ref_ids.insert(utt);
    if (!hyps.count(utt) || !bias.count(utt)) mismatched.push_back(utt);
  }
  for (const auto& [utt, _] : hyps_rows) {
    if (!ref_ids.count(utt)) mismatched.push_back(utt);
  }
  if (!mismatched.empty()) {
    std::string msg = "utterance ids differ between refs, hyps and bias list (" +
                      std::to_string(mismatched.size()) + "):";
    for (std::size_t i = 0; i < mismatched.size() && i < 5; ++i) {
      msg += " " + mismatched[i];
    }
    throw InputError(msg);
  }

  std::vector<WerBreakdown> per;
  std::ofstream tsv;
  if (!a.per_utt.empty()) {
    tsv = io::open_output(a.per_utt);
    tsv << "utt\terrors\twords\tu_errors\tu_words\tb_errors\tb_words\n";
  }
  for (const auto& [utt, text] : refs) {
    const auto r = normalized_words(text);
    const auto h = normalized_words(hyps.at(utt));
    per.push_back(score(align(r, h), bias.at(utt)));
    if (tsv.is_open()) {
      const auto& b = per.back();
      tsv << utt << '\t' << b.wer().errors << '\t' << b.wer().words << '\t'
          << b.u_wer().errors << '\t' << b.u_wer().words << '\t'
          << b.b_wer().errors << '\t' << b.b_wer().words << '\n';
    }
  }
  const auto total = aggregate(per);
  auto rate_json = [](const ErrorRate& r) {
    nlohmann::json j{{"errors", r.errors}, {"words", r.words}};
    if (r.defined()) {
      j["rate"] = r.value();
    } else {
      j["rate"] = "undefined";
    }
    return j;
  };
  const nlohmann::json summary{{"utterances", refs.size()},
                               {"wer", rate_json(total.wer())},
                               {"u_wer", rate_json(total.u_wer())},
                               {"b_wer", rate_json(total.b_wer())}};
  if (!a.out.empty()) {
    auto out = io::open_output(a.out);
    out << summary.dump(2) << '\n';
  }
  std::cout << "WER\tU-WER\tB-WER\n"
            << total.wer().percent() << '\t' << total.u_wer().percent() << '\t'
            << total.b_wer().percent() << '\n';
  return 0;
}

// serve-table

int run_serve_table(const std::string& table) {
  auto scorer = load_toy_table_scorer(table);
  wire::serve(*scorer, std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trie-based contextual biasing toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string run_manifest;
  app.add_option("--run-manifest", run_manifest,
                 "Write a JSON record of this invocation");

  BiasListArgs bl;
  auto* make = app.add_subcommand("make-biaslist",
                                  "Per-utterance biasing lists with distractors");
  make->add_option("--freq", bl.freq, "word<TAB>count training frequencies");
  make->add_option("--common-list", bl.common_list, "Published common words");
  make->add_option("--rare-list", bl.rare_list, "Published rare words");
  make->add_option("--refs", bl.refs, "utt<TAB>transcript references")->required();
  make->add_option("-N,--distractors", bl.distractors, "Distractors per utterance")
      ->capture_default_str();
  make->add_option("--cutoff", bl.cutoff, "Number of common words")
      ->capture_default_str();
  make->add_option("--seed", bl.seed, "Sampling seed")->capture_default_str();
  make->add_option("--out", bl.out, "Output JSON-lines")->required();

  ExtractArgs ex;
  auto* extract = app.add_subcommand(
      "extract-variants", "Mine pronunciation variants from marked transcripts");
  extract->add_option("--transcripts", ex.transcripts)->required();
  extract->add_option("--markers", ex.markers)->required();
  extract->add_option("--hotwords", ex.hotwords)->required();
  extract->add_option("--vocab", ex.vocab)->required();
  extract->add_option("--out", ex.out)->required();
  extract->add_option("--report", ex.report, "Per-hotword counts TSV (default: stderr)");

  DecodeArgs de;
  auto* dec = app.add_subcommand("decode", "Beam search with trie biasing");
  auto* table_opt = dec->add_option("--toy-table", de.toy_table);
  auto* cmd_opt = dec->add_option("--scorer-cmd", de.scorer_cmd,
                                  "Bridge command speaking the scorer protocol");
  table_opt->excludes(cmd_opt);
  dec->add_option("--hotwords", de.hotwords, "Hotword list; omit for no biasing");
  dec->add_option("--paths", de.paths, "canonical|variants|both")
      ->check(CLI::IsMember({"canonical", "variants", "both"}))
      ->capture_default_str();
  dec->add_option("--vocab", de.vocab)->required();
  dec->add_option("--manifest", de.manifest, "utt<TAB>audio")->required();
  dec->add_option("--scheme", de.scheme)
      ->check(CLI::IsMember({"final", "uniform"}))
      ->capture_default_str();
  dec->add_option("--beam-size", de.beam_size)->capture_default_str();
  dec->add_option("--candidates", de.candidates,
                  "Top tokens per hypothesis (default: beam size)");
  dec->add_option("--max-len", de.max_len)->capture_default_str();
  dec->add_option("--reward-scale", de.reward_scale)->capture_default_str();
  dec->add_flag("--length-norm", de.length_norm);
  dec->add_option("--end-token", de.end_token);
  dec->add_option("--workers", de.workers)->capture_default_str();
  dec->add_option("--out", de.out, "utt<TAB>text")->required();
  dec->add_option("--commits", de.commits, "Per-utterance commit log");

  ScoreArgs sc;
  auto* scr = app.add_subcommand("score", "WER / U-WER / B-WER");
  scr->add_option("--refs", sc.refs)->required();
  scr->add_option("--hyps", sc.hyps)->required();
  scr->add_option("--biaslist", sc.biaslist)->required();
  scr->add_option("--out", sc.out, "JSON summary");
  scr->add_option("--per-utt", sc.per_utt, "Per-utterance TSV");

  std::string serve_table;
  auto* serve = app.add_subcommand(
      "serve-table", "Serve a toy table over the scorer protocol on stdio");
  serve->add_option("--table", serve_table)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    write_run_manifest(run_manifest, sub->get_name(), argc, argv);
    if (sub == make) return run_make_biaslist(bl);
    if (sub == extract) return run_extract_variants(ex);
    if (sub == dec) return run_decode(de);
    if (sub == scr) return run_score(sc);
    if (sub == serve) return run_serve_table(serve_table);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ProtocolError& e) {
    std::cerr << "scorer error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
