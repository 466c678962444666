// Copyright 2026  The sambr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Scoring for speaker-attributed transcripts: Levenshtein statistics, a
// rectangular min-cost assignment, SER / WER / SA-WER and speaker-counting
// confusion. Corpus-level numbers are reduced by summing counts, never by
// averaging rates.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sambr/core.hpp"

namespace sambr {

struct EditStats {
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;

  long distance() const { return substitutions + insertions + deletions; }

  EditStats& operator+=(const EditStats& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    return *this;
  }
  friend bool operator==(const EditStats&, const EditStats&) = default;
};

/// Unit-cost Levenshtein alignment of `hyp` against `ref`. Insertions are hyp
/// tokens absent from ref. When several minimal alignments exist the
/// backtrace prefers substitution (or match), then insertion, then deletion.
inline EditStats edit_distance(std::span<const TokenId> hyp,
                               std::span<const TokenId> ref) {
  const std::size_t nh = hyp.size(), nr = ref.size();
  std::vector<long> d((nh + 1) * (nr + 1));
  auto at = [&](std::size_t i, std::size_t j) -> long& {
    return d[i * (nr + 1) + j];
  };
  for (std::size_t i = 0; i <= nh; ++i) at(i, 0) = static_cast<long>(i);
  for (std::size_t j = 0; j <= nr; ++j) at(0, j) = static_cast<long>(j);
  for (std::size_t i = 1; i <= nh; ++i) {
    for (std::size_t j = 1; j <= nr; ++j) {
      const long sub = at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditStats st;
  std::size_t i = nh, j = nr;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      if (hyp[i - 1] != ref[j - 1]) ++st.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++st.insertions;
      --i;
    } else {
      ++st.deletions;
      --j;
    }
  }
  return st;
}

/// Dense cost matrix, rows x cols, row-major.
struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
};

struct Assignment {
  std::vector<int> row_to_col;  // -1 when the row is unmatched
  double cost = 0.0;
};

/// Minimum-cost injective matching of size min(rows, cols) (Hungarian
/// algorithm, O(n^3) on the square-padded matrix). The extra rows or columns
/// are left unmatched at zero cost; callers that need a price for unmatched
/// items pad the matrix themselves.
inline Assignment assign_min_cost(const CostMatrix& cost) {
  Assignment out;
  out.row_to_col.assign(cost.rows, -1);
  if (cost.rows == 0 || cost.cols == 0) return out;
  for (double v : cost.data)
    if (!std::isfinite(v)) throw NumericError("non-finite assignment cost");

  const std::size_t n = std::max(cost.rows, cost.cols);
  auto c = [&](std::size_t i, std::size_t j) {
    return (i < cost.rows && j < cost.cols) ? cost(i, j) : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j] - 1;
    if (i < cost.rows && j - 1 < cost.cols) {
      out.row_to_col[i] = static_cast<int>(j - 1);
      out.cost += cost(i, j - 1);
    }
  }
  return out;
}

/// Counts behind SER. Unmatched hypothesis utterances are insertions and
/// unmatched reference utterances are deletions, each costing one error.
struct SerCounts {
  long misattributions = 0;
  long insertions = 0;
  long deletions = 0;
  long ref_utterances = 0;

  long errors() const { return misattributions + insertions + deletions; }
  SerCounts& operator+=(const SerCounts& o) {
    misattributions += o.misattributions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_utterances += o.ref_utterances;
    return *this;
  }
  friend bool operator==(const SerCounts&, const SerCounts&) = default;
};

struct WordErrorCounts {
  EditStats stats;
  long ref_words = 0;

  long errors() const { return stats.distance(); }
  WordErrorCounts& operator+=(const WordErrorCounts& o) {
    stats += o.stats;
    ref_words += o.ref_words;
    return *this;
  }
  friend bool operator==(const WordErrorCounts&,
                         const WordErrorCounts&) = default;
};

inline double safe_rate(long num, long den) {
  if (den <= 0) throw UndefinedDenominatorError("rate with zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

/// Rates are rendered with 4 decimals for reports.
inline std::string format_rate(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", r);
  return buf;
}

struct SerResult {
  double rate = 0.0;
  SerCounts counts;
  Assignment assignment;  // rows = reference utterances
};

/// Speaker error rate: the best utterance pairing ignoring words, cost 0 for
/// a speaker match and 1 otherwise; every unpaired utterance costs 1.
inline SerResult compute_ser(const AttributedTranscript& hyp,
                             const AttributedTranscript& ref) {
  const auto& R = ref.utterances;
  const auto& H = hyp.utterances;
  if (R.empty()) throw UndefinedDenominatorError("reference has no utterances");
  const std::size_t n = std::max(R.size(), H.size());
  CostMatrix cost(n, n, 1.0);
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = 0; j < H.size(); ++j)
      cost(i, j) = R[i].speaker == H[j].speaker ? 0.0 : 1.0;
  SerResult out;
  auto full = assign_min_cost(cost);
  out.assignment.row_to_col.assign(R.size(), -1);
  for (std::size_t i = 0; i < R.size(); ++i) {
    const int j = full.row_to_col[i];
    if (j >= 0 && static_cast<std::size_t>(j) < H.size()) {
      out.assignment.row_to_col[i] = j;
      if (R[i].speaker != H[j].speaker) ++out.counts.misattributions;
    } else {
      ++out.counts.deletions;
    }
  }
  out.counts.insertions =
      static_cast<long>(H.size()) -
      static_cast<long>(R.size() - static_cast<std::size_t>(out.counts.deletions));
  out.counts.ref_utterances = static_cast<long>(R.size());
  out.assignment.cost = static_cast<double>(out.counts.errors());
  out.rate = safe_rate(out.counts.errors(), out.counts.ref_utterances);
  return out;
}

struct WerResult {
  double rate = 0.0;
  WordErrorCounts counts;
  Assignment assignment;  // rows = reference utterances
};

/// Speaker-agnostic WER under the best utterance permutation. Unpaired
/// utterances are scored against the empty sequence.
inline WerResult compute_wer(const AttributedTranscript& hyp,
                             const AttributedTranscript& ref) {
  const auto& R = ref.utterances;
  const auto& H = hyp.utterances;
  const std::size_t n = std::max(R.size(), H.size());
  CostMatrix cost(n, n, 0.0);
  std::vector<std::vector<EditStats>> pair(R.size(),
                                           std::vector<EditStats>(H.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i < R.size() && j < H.size()) {
        pair[i][j] = edit_distance(H[j].tokens, R[i].tokens);
        cost(i, j) = static_cast<double>(pair[i][j].distance());
      } else if (i < R.size()) {
        cost(i, j) = static_cast<double>(R[i].tokens.size());
      } else if (j < H.size()) {
        cost(i, j) = static_cast<double>(H[j].tokens.size());
      }
    }
  }
  WerResult out;
  out.counts.ref_words = static_cast<long>(ref.num_words());
  if (out.counts.ref_words == 0)
    throw UndefinedDenominatorError("reference has no words");
  auto full = assign_min_cost(cost);
  out.assignment.row_to_col.assign(R.size(), -1);
  std::vector<char> hyp_used(H.size(), 0);
  for (std::size_t i = 0; i < R.size(); ++i) {
    const int j = full.row_to_col[i];
    if (j >= 0 && static_cast<std::size_t>(j) < H.size()) {
      out.assignment.row_to_col[i] = j;
      hyp_used[j] = 1;
      out.counts.stats += pair[i][j];
    } else {
      out.counts.stats.deletions += static_cast<long>(R[i].tokens.size());
    }
  }
  for (std::size_t j = 0; j < H.size(); ++j)
    if (!hyp_used[j])
      out.counts.stats.insertions += static_cast<long>(H[j].tokens.size());
  out.assignment.cost = static_cast<double>(out.counts.errors());
  out.rate = safe_rate(out.counts.errors(), out.counts.ref_words);
  return out;
}

namespace detail {

// Speakers in first-appearance order over ref then hyp, with each speaker's
// words concatenated in emission order.
inline std::vector<std::pair<SpeakerId, std::array<TokenSeq, 2>>>
words_by_speaker(const AttributedTranscript& hyp,
                 const AttributedTranscript& ref) {
  std::vector<std::pair<SpeakerId, std::array<TokenSeq, 2>>> out;
  auto slot = [&](SpeakerId s) -> std::array<TokenSeq, 2>& {
    for (auto& e : out)
      if (e.first == s) return e.second;
    out.push_back({s, {}});
    return out.back().second;
  };
  for (const auto& u : ref.utterances) {
    auto& t = slot(u.speaker)[1];
    t.insert(t.end(), u.tokens.begin(), u.tokens.end());
  }
  for (const auto& u : hyp.utterances) {
    auto& t = slot(u.speaker)[0];
    t.insert(t.end(), u.tokens.begin(), u.tokens.end());
  }
  return out;
}

}  // namespace detail

/// Raw speaker-attributed error count: per-speaker edit distance summed over
/// the union of hypothesis and reference speakers.
inline EditStats sa_edit_stats(const AttributedTranscript& hyp,
                               const AttributedTranscript& ref) {
  EditStats total;
  for (const auto& [spk, words] : detail::words_by_speaker(hyp, ref))
    total += edit_distance(words[0], words[1]);
  return total;
}

inline long sa_error_count(const AttributedTranscript& hyp,
                           const AttributedTranscript& ref) {
  return sa_edit_stats(hyp, ref).distance();
}

struct SaWerResult {
  double rate = 0.0;
  WordErrorCounts counts;
};

inline SaWerResult compute_sa_wer(const AttributedTranscript& hyp,
                                  const AttributedTranscript& ref) {
  SaWerResult out;
  out.counts.ref_words = static_cast<long>(ref.num_words());
  if (out.counts.ref_words == 0)
    throw UndefinedDenominatorError("reference has no words");
  out.counts.stats = sa_edit_stats(hyp, ref);
  out.rate = safe_rate(out.counts.errors(), out.counts.ref_words);
  return out;
}

/// Corpus-level accumulator for all three metrics.
struct MetricReport {
  SerCounts ser;
  WordErrorCounts wer;
  WordErrorCounts sa_wer;
  long num_samples = 0;

  void add(const AttributedTranscript& hyp, const AttributedTranscript& ref) {
    ser += compute_ser(hyp, ref).counts;
    wer += compute_wer(hyp, ref).counts;
    sa_wer += compute_sa_wer(hyp, ref).counts;
    ++num_samples;
  }
  MetricReport& operator+=(const MetricReport& o) {
    ser += o.ser;
    wer += o.wer;
    sa_wer += o.sa_wer;
    num_samples += o.num_samples;
    return *this;
  }

  double ser_rate() const { return safe_rate(ser.errors(), ser.ref_utterances); }
  double wer_rate() const { return safe_rate(wer.errors(), wer.ref_words); }
  double sa_wer_rate() const {
    return safe_rate(sa_wer.errors(), sa_wer.ref_words);
  }
};

/// Rows are actual speaker counts, columns estimated counts 1, 2, 3, >=4.
struct SpeakerCountConfusion {
  std::map<int, std::array<long, 4>> counts;

  static int column(int estimated) { return std::clamp(estimated, 1, 4) - 1; }

  std::array<double, 4> row_percent(int actual) const {
    std::array<double, 4> out{};
    auto it = counts.find(actual);
    if (it == counts.end()) return out;
    long total = 0;
    for (long c : it->second) total += c;
    if (total == 0) return out;
    for (int c = 0; c < 4; ++c)
      out[c] = 100.0 * static_cast<double>(it->second[c]) /
               static_cast<double>(total);
    return out;
  }

  /// Percentage of `actual`-speaker samples whose count was estimated right.
  double accuracy(int actual) const {
    return row_percent(actual)[column(actual)];
  }

  std::string to_csv() const {
    std::string out = "actual,est_1,est_2,est_3,est_ge4\n";
    for (const auto& [actual, _] : counts) {
      out += std::to_string(actual);
      for (double p : row_percent(actual)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, ",%.2f", p);
        out += buf;
      }
      out += "\n";
    }
    return out;
  }
};

inline SpeakerCountConfusion speaker_count_confusion(
    std::span<const std::pair<int, int>> estimated_actual) {
  SpeakerCountConfusion out;
  for (const auto& [est, actual] : estimated_actual) {
    if (est < 1 || actual < 1)
      throw ContractError("speaker counts must be >= 1");
    out.counts[actual][SpeakerCountConfusion::column(est)] += 1;
  }
  return out;
}

}  // namespace sambr
