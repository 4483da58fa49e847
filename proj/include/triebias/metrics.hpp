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

// Word alignment and WER / U-WER / B-WER.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <utility>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace triebias {

enum class EditKind { kMatch, kSub, kDel, kIns };

struct EditOp {
  EditKind kind;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct EditCounts {
  std::int64_t match = 0;
  std::int64_t sub = 0;
  std::int64_t del = 0;
  std::int64_t ins = 0;

  std::int64_t errors() const { return sub + del + ins; }
};

struct AlignmentReport {
  std::vector<EditOp> ops;
  EditCounts counts;
};

/// Minimal unit-cost alignment. Among optimal alignments, the one that
/// prefers match, then sub, then del, then ins at the earliest position is
/// returned.
inline AlignmentReport align(std::span<const std::string> ref,
                             std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // cost[i][j]: edit distance between ref[i:] and hyp[j:]
  std::vector<std::vector<std::int64_t>> cost(
      n + 1, std::vector<std::int64_t>(m + 1, 0));
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n) {
        cost[i][j] = static_cast<std::int64_t>(m - j);
      } else if (j == m) {
        cost[i][j] = static_cast<std::int64_t>(n - i);
      } else {
        const std::int64_t diag =
            cost[i + 1][j + 1] + (ref[i] == hyp[j] ? 0 : 1);
        cost[i][j] = std::min({diag, cost[i + 1][j] + 1, cost[i][j + 1] + 1});
      }
    }
  }

  AlignmentReport report;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const std::int64_t here = cost[i][j];
    if (i < n && j < m && ref[i] == hyp[j] && cost[i + 1][j + 1] == here) {
      report.ops.push_back({EditKind::kMatch, ref[i], hyp[j]});
      ++report.counts.match;
      ++i;
      ++j;
    } else if (i < n && j < m && cost[i + 1][j + 1] + 1 == here) {
      report.ops.push_back({EditKind::kSub, ref[i], hyp[j]});
      ++report.counts.sub;
      ++i;
      ++j;
    } else if (i < n && cost[i + 1][j] + 1 == here) {
      report.ops.push_back({EditKind::kDel, ref[i], {}});
      ++report.counts.del;
      ++i;
    } else {
      report.ops.push_back({EditKind::kIns, {}, hyp[j]});
      ++report.counts.ins;
      ++j;
    }
  }
  return report;
}

/// errors / words, with 0/0 defined as 0 and x/0 (x > 0) undefined.
struct ErrorRate {
  std::int64_t errors = 0;
  std::int64_t words = 0;

  bool defined() const { return words > 0 || errors == 0; }
  double value() const {
    if (words == 0) {
      return errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return static_cast<double>(errors) / static_cast<double>(words);
  }
  /// Percentage with two decimals, or "undefined".
  std::string percent() const {
    if (!defined()) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * value());
    return buf;
  }

  ErrorRate& operator+=(const ErrorRate& o) {
    errors += o.errors;
    words += o.words;
    return *this;
  }
  friend bool operator==(const ErrorRate&, const ErrorRate&) = default;
};

struct WerBreakdown {
  EditCounts unbiased;  // errors attributed to U
  EditCounts biased;    // errors attributed to B
  std::int64_t unbiased_words = 0;
  std::int64_t biased_words = 0;

  ErrorRate wer() const {
    return {unbiased.errors() + biased.errors(), unbiased_words + biased_words};
  }
  ErrorRate u_wer() const { return {unbiased.errors(), unbiased_words}; }
  ErrorRate b_wer() const { return {biased.errors(), biased_words}; }

  WerBreakdown& operator+=(const WerBreakdown& o) {
    for (auto [dst, src] : {std::pair{&unbiased, &o.unbiased},
                            std::pair{&biased, &o.biased}}) {
      dst->match += src->match;
      dst->sub += src->sub;
      dst->del += src->del;
      dst->ins += src->ins;
    }
    unbiased_words += o.unbiased_words;
    biased_words += o.biased_words;
    return *this;
  }
};

/// Attribution: a match, sub or del goes to B when the reference word is in
/// `bias_words`, else to U. An insertion goes to B when the inserted
/// hypothesis word is in `bias_words`.
inline WerBreakdown score(const AlignmentReport& report,
                          const std::set<std::string, std::less<>>& bias_words) {
  WerBreakdown out;
  for (const auto& op : report.ops) {
    if (op.kind == EditKind::kIns) {
      (bias_words.count(op.hyp) ? out.biased : out.unbiased).ins += 1;
      continue;
    }
    const bool biased = bias_words.count(op.ref) != 0;
    auto& counts = biased ? out.biased : out.unbiased;
    (biased ? out.biased_words : out.unbiased_words) += 1;
    switch (op.kind) {
      case EditKind::kMatch: ++counts.match; break;
      case EditKind::kSub: ++counts.sub; break;
      case EditKind::kDel: ++counts.del; break;
      case EditKind::kIns: break;
    }
  }
  return out;
}

/// Micro-average: numerators and denominators are summed.
inline WerBreakdown aggregate(std::span<const WerBreakdown> per_utt) {
  WerBreakdown total;
  for (const auto& b : per_utt) total += b;
  return total;
}

}  // namespace triebias
