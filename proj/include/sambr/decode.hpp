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

// Extended beam search for the speaker-attributed model.
//
// Hypotheses branch over tokens only. Each carries the full speaker
// posterior b_n of every step; the speaker of a <sc>/<eos>-delimited segment
// is the argmax of the segment's averaged b_n (terminating symbol included,
// ties to the lower inventory index). The speaker term of the running score
// uses the current segment's best speaker and is recomputed every step:
//
//   log_joint = sum_n log o_{n,y_n} + gamma * sum_segments sum_{n in seg} log b_{n,k*(seg)}
//
// With length normalization hypotheses are compared by log_joint / |Y|,
// where |Y| counts every emitted token including <sc> and <eos>.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sambr/core.hpp"
#include "sambr/model.hpp"

namespace sambr {

struct BeamConfig {
  int beam_size = 16;
  int nbest_size = 4;
  int max_steps = 40;
  bool length_norm = true;
  double gamma_decode = 1.0;

  void validate() const {
    if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
    if (nbest_size < 1 || nbest_size > beam_size)
      throw ConfigError("nbest_size must be in [1, beam_size]");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(gamma_decode >= 0.0)) throw ConfigError("gamma_decode must be >= 0");
  }
};

/// A (finished) decoding hypothesis. `segment_speakers` holds the inventory
/// position chosen for each closed segment.
struct Hypothesis {
  TokenSeq tokens;
  std::vector<std::vector<double>> betas;
  std::vector<double> token_logprobs;
  std::vector<std::size_t> segment_speakers;
  double log_joint = 0.0;
  bool finished = false;
  bool truncated = false;

  std::size_t length() const { return tokens.size(); }
};

/// Per-segment speaker choice from summed b_n (argmax of the sum equals the
/// argmax of the average). Ties go to the lower index.
inline std::size_t argmax_index(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

/// Recompute the segment speakers of a finished hypothesis from its b_n trace.
inline std::vector<std::size_t> segment_speaker_indices(const Hypothesis& hyp,
                                                        const Vocabulary& vocab) {
  if (hyp.tokens.size() != hyp.betas.size())
    throw MalformedHypothesisError("betas and tokens differ in length");
  std::vector<std::size_t> out;
  std::vector<double> sum;
  for (std::size_t n = 0; n < hyp.tokens.size(); ++n) {
    const auto& b = hyp.betas[n];
    if (sum.empty()) sum.assign(b.size(), 0.0);
    for (std::size_t k = 0; k < b.size(); ++k) sum[k] += b[k];
    if (hyp.tokens[n] == vocab.sc_id() || hyp.tokens[n] == vocab.eos_id()) {
      out.push_back(argmax_index(sum));
      sum.clear();
    }
  }
  return out;
}

/// Per-token inventory positions implied by the segment speakers.
inline std::vector<std::size_t> token_speaker_indices(const Hypothesis& hyp,
                                                      const Vocabulary& vocab) {
  std::vector<std::size_t> out;
  out.reserve(hyp.tokens.size());
  std::size_t seg = 0;
  for (TokenId t : hyp.tokens) {
    if (seg >= hyp.segment_speakers.size())
      throw MalformedHypothesisError("hypothesis has an unterminated segment");
    out.push_back(hyp.segment_speakers[seg]);
    if (t == vocab.sc_id() || t == vocab.eos_id()) ++seg;
  }
  return out;
}

/// Segment-wise speaker attribution followed by same-speaker merging.
inline AttributedTranscript attribute_speakers(const Hypothesis& hyp,
                                               const SpeakerInventory& inv,
                                               const Vocabulary& vocab) {
  if (!hyp.finished)
    throw MalformedHypothesisError("cannot attribute an unfinished hypothesis");
  auto segments = segment_by_sc(hyp.tokens, vocab);
  auto speakers = segment_speaker_indices(hyp, vocab);
  std::vector<Utterance> utts;
  for (std::size_t i = 0; i < segments.size(); ++i)
    utts.push_back({inv[speakers.at(i)].speaker_id(), std::move(segments[i])});
  return merge_utterances(utts);
}

/// Distinct speakers in a merged transcript; an empty transcript counts as 1.
inline int estimate_speaker_count(const AttributedTranscript& t) {
  return std::max<int>(1, static_cast<int>(t.utterances.size()));
}

/// log_joint recomputed from a hypothesis trace.
inline double recompute_log_joint(const Hypothesis& hyp, const Vocabulary& vocab,
                                  double gamma) {
  double tok = 0.0;
  for (double lp : hyp.token_logprobs) tok += lp;
  const auto speakers = segment_speaker_indices(hyp, vocab);
  double spk = 0.0;
  std::size_t seg = 0;
  double seg_sum = 0.0;
  for (std::size_t n = 0; n < hyp.tokens.size(); ++n) {
    seg_sum += std::log(hyp.betas[n][speakers.at(seg)]);
    if (hyp.tokens[n] == vocab.sc_id() || hyp.tokens[n] == vocab.eos_id()) {
      spk += gamma * seg_sum;
      seg_sum = 0.0;
      ++seg;
    }
  }
  return tok + spk + gamma * seg_sum;
}

inline double normalized_score(double log_joint, std::size_t length,
                               bool length_norm) {
  return length_norm ? log_joint / static_cast<double>(length) : log_joint;
}

struct NBestEntry {
  Hypothesis hyp;
  AttributedTranscript transcript;
  double norm_score = 0.0;
};

struct NBestList {
  std::string ref_id;
  std::vector<NBestEntry> entries;
};

namespace detail {

struct BeamItem {
  Hypothesis hyp;
  DecoderState state;
  double token_logsum = 0.0;
  double closed_speaker = 0.0;     // gamma-scaled, closed segments
  std::vector<double> seg_beta;    // running sum of b_n in the open segment
  std::vector<double> seg_logbeta; // running sum of log b_n in the open segment
};

struct Candidate {
  double score;
  double log_joint;
  TokenId token;
  std::size_t parent;
};

inline bool finished_before(const NBestEntry& a, const NBestEntry& b) {
  if (a.norm_score != b.norm_score) return a.norm_score > b.norm_score;
  return a.hyp.tokens < b.hyp.tokens;
}

}  // namespace detail

/// Beam search over tokens. Returns at most `nbest_size` finished hypotheses
/// ranked by (normalized) score.
inline NBestList beam_search(const Model& model, const FeatureSequence& x,
                             const SpeakerInventory& inv, const Vocabulary& vocab,
                             const BeamConfig& cfg) {
  cfg.validate();
  if (vocab.size() != model.config().vocab_size)
    throw ConfigError("vocabulary size does not match the model");
  ad::Tape tape;
  Binder b(model, tape);
  const EncodedInput enc = model.encode(b, x, inv);
  const std::size_t K = inv.size();
  const std::size_t V = static_cast<std::size_t>(vocab.size());
  const double gamma = cfg.gamma_decode;
  const auto beam = static_cast<std::size_t>(cfg.beam_size);

  std::vector<detail::BeamItem> active(1);
  active[0].state = model.initial_state(b, enc);
  active[0].seg_beta.assign(K, 0.0);
  active[0].seg_logbeta.assign(K, 0.0);
  std::vector<NBestEntry> finished;

  for (int step = 1; step <= cfg.max_steps && !active.empty(); ++step) {
    const bool force_eos = step == cfg.max_steps && finished.empty();
    std::vector<detail::Candidate> cands;
    std::vector<DecoderStepOutput> outs;
    outs.reserve(active.size());
    cands.reserve(active.size() * V);
    for (std::size_t p = 0; p < active.size(); ++p) {
      const auto& item = active[p];
      const TokenId prev =
          item.hyp.tokens.empty() ? Model::start_token(vocab) : item.hyp.tokens.back();
      outs.push_back(model.step(b, enc, item.state, prev));
      const auto& lo = outs.back().log_token_dist.value();
      const auto& lb = outs.back().log_speaker_dist.value();
      const auto& bb = outs.back().speaker_dist.value();
      std::vector<double> sb = item.seg_beta, slb = item.seg_logbeta;
      for (std::size_t k = 0; k < K; ++k) {
        sb[k] += bb[k];
        slb[k] += lb[k];
      }
      const double spk = item.closed_speaker + gamma * slb[argmax_index(sb)];
      const std::size_t len = item.hyp.tokens.size() + 1;
      for (std::size_t i = 0; i < V; ++i) {
        const auto tok = static_cast<TokenId>(i);
        if (force_eos && tok != vocab.eos_id()) continue;
        const double lj = item.token_logsum + lo[i] + spk;
        cands.push_back({normalized_score(lj, len, cfg.length_norm), lj, tok, p});
      }
    }
    std::sort(cands.begin(), cands.end(),
              [](const detail::Candidate& a, const detail::Candidate& c) {
                if (a.score != c.score) return a.score > c.score;
                if (a.token != c.token) return a.token < c.token;
                return a.parent < c.parent;
              });
    if (cands.size() > beam) cands.resize(beam);

    std::vector<detail::BeamItem> next;
    for (const auto& c : cands) {
      const auto& parent = active[c.parent];
      const auto& out = outs[c.parent];
      detail::BeamItem item;
      item.hyp = parent.hyp;
      item.state = out.next_state;
      const auto& lo = out.log_token_dist.value();
      const auto& lb = out.log_speaker_dist.value();
      const auto& bb = out.speaker_dist.value();
      item.hyp.tokens.push_back(c.token);
      item.hyp.betas.emplace_back(bb.data().begin(), bb.data().end());
      item.hyp.token_logprobs.push_back(lo[static_cast<std::size_t>(c.token)]);
      item.token_logsum = parent.token_logsum + lo[static_cast<std::size_t>(c.token)];
      item.seg_beta = parent.seg_beta;
      item.seg_logbeta = parent.seg_logbeta;
      for (std::size_t k = 0; k < K; ++k) {
        item.seg_beta[k] += bb[k];
        item.seg_logbeta[k] += lb[k];
      }
      item.closed_speaker = parent.closed_speaker;
      item.hyp.log_joint = c.log_joint;
      if (c.token == vocab.sc_id() || c.token == vocab.eos_id()) {
        const std::size_t best = argmax_index(item.seg_beta);
        item.hyp.segment_speakers.push_back(best);
        item.closed_speaker += gamma * item.seg_logbeta[best];
        std::fill(item.seg_beta.begin(), item.seg_beta.end(), 0.0);
        std::fill(item.seg_logbeta.begin(), item.seg_logbeta.end(), 0.0);
      }
      if (c.token == vocab.eos_id()) {
        item.hyp.finished = true;
        item.hyp.truncated = force_eos;
        NBestEntry e;
        e.norm_score = c.score;
        e.transcript = attribute_speakers(item.hyp, inv, vocab);
        e.hyp = std::move(item.hyp);
        finished.push_back(std::move(e));
      } else {
        next.push_back(std::move(item));
      }
    }
    active = std::move(next);

    // Stop once no active hypothesis can still enter the N-best.
    if (finished.size() >= static_cast<std::size_t>(cfg.nbest_size) && !active.empty()) {
      std::vector<double> fs;
      for (const auto& f : finished) fs.push_back(f.norm_score);
      std::nth_element(fs.begin(), fs.begin() + (cfg.nbest_size - 1), fs.end(),
                       std::greater<>());
      const double worst_kept = fs[static_cast<std::size_t>(cfg.nbest_size - 1)];
      double best_bound = -std::numeric_limits<double>::infinity();
      for (const auto& it : active) {
        const double ub = it.token_logsum + it.closed_speaker +
                          gamma * *std::max_element(it.seg_logbeta.begin(),
                                                    it.seg_logbeta.end());
        best_bound = std::max(
            best_bound, cfg.length_norm ? ub / static_cast<double>(cfg.max_steps) : ub);
      }
      if (worst_kept >= best_bound) break;
    }
  }

  std::sort(finished.begin(), finished.end(), detail::finished_before);
  if (finished.size() > static_cast<std::size_t>(cfg.nbest_size))
    finished.resize(static_cast<std::size_t>(cfg.nbest_size));
  NBestList list;
  list.entries = std::move(finished);
  return list;
}

}  // namespace sambr
