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

// Training objectives.
//
// SA-MMI:  L = -log P(Y_r, S_r | X_r, D_r), speaker term scaled by gamma.
//
// SA-MBR:  L = sum_h Phat_h * E_h over the N-best list, where
//          Phat_h = softmax_h( log P(Y_h,S_h|X,D) / |Y_h| )   (gamma = 1)
//          and E_h is the raw speaker-attributed error count of hypothesis h.
//
// For a realized token y_n (or speaker s_n) of hypothesis h the gradient of
// L w.r.t. log o_{n,y_n} (or log b_{n,s_n}) is
//          (1/|Y_h|) * Phat_h * (E_h - Ebar)
// and zero for every other entry. mbr_closed_form_seeds() produces exactly
// these values so they can be injected into the tape as an independent path.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "sambr/autodiff.hpp"
#include "sambr/decode.hpp"
#include "sambr/metrics.hpp"
#include "sambr/model.hpp"

namespace sambr {

/// gamma used inside the SA-MBR posterior.
inline constexpr double kMbrPosteriorGamma = 1.0;

/// SA-MMI loss on `tape` for one sample.
inline ad::Var sa_mmi_loss(const Model& model, Binder& b,
                           const SerializedReference& ref,
                           const FeatureSequence& x, const SpeakerInventory& inv,
                           const Vocabulary& vocab, double gamma) {
  return ad::scale(joint_log_prob(model, b, ref, x, inv, vocab, gamma), -1.0);
}

/// Softmax over (length-normalized) log joints.
inline std::vector<double> normalized_posterior(std::span<const double> log_joints,
                                                std::span<const std::size_t> lengths,
                                                bool length_norm = true) {
  if (log_joints.empty()) throw ContractError("empty N-best list");
  if (log_joints.size() != lengths.size())
    throw DimensionError("log joints and lengths differ in size");
  std::vector<double> s(log_joints.size());
  for (std::size_t h = 0; h < s.size(); ++h) {
    if (lengths[h] < 1) throw ContractError("hypothesis length must be >= 1");
    s[h] = normalized_score(log_joints[h], lengths[h], length_norm);
  }
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - mx);
  const double lz = std::log(z);
  for (double& v : s) v = std::exp(v - mx - lz);
  return s;
}

/// Remove hypotheses identical in (tokens, segment speakers), keeping the
/// higher raw score. Order of first appearance is preserved.
inline std::vector<NBestEntry> dedup_nbest(const std::vector<NBestEntry>& in) {
  std::vector<NBestEntry> out;
  for (const auto& e : in) {
    auto it = std::find_if(out.begin(), out.end(), [&](const NBestEntry& o) {
      return o.hyp.tokens == e.hyp.tokens &&
             o.hyp.segment_speakers == e.hyp.segment_speakers;
    });
    if (it == out.end())
      out.push_back(e);
    else if (e.hyp.log_joint > it->hyp.log_joint)
      *it = e;
  }
  return out;
}

/// One N-best list prepared for SA-MBR: hypotheses and their error counts.
struct MbrBatchItem {
  std::vector<Hypothesis> hyps;
  std::vector<long> errors;
  bool length_norm = true;
};

inline MbrBatchItem make_mbr_item(const NBestList& nbest,
                                  const AttributedTranscript& reference,
                                  bool length_norm = true) {
  MbrBatchItem item;
  item.length_norm = length_norm;
  for (const auto& e : dedup_nbest(nbest.entries)) {
    item.hyps.push_back(e.hyp);
    item.errors.push_back(sa_error_count(e.transcript, reference));
  }
  if (item.hyps.empty()) throw ContractError("N-best list is empty");
  return item;
}

/// Tape record of the SA-MBR loss for one item.
struct TapedMbr {
  ad::Var loss;                       // Ebar
  ad::Var posterior;                  // 1 x N
  std::vector<ad::Var> norm_scores;   // s_h
  std::vector<TeacherForcedScore> scored;
  std::vector<std::vector<std::size_t>> token_speakers;
};

/// Rescore every hypothesis teacher-forced on `b`'s tape and build Ebar.
inline TapedMbr sa_mbr_loss(const Model& model, Binder& b, const EncodedInput& e,
                            const MbrBatchItem& item, const Vocabulary& vocab) {
  if (item.hyps.empty()) throw ContractError("N-best list is empty");
  TapedMbr out;
  std::vector<ad::Var> scores;
  for (const auto& h : item.hyps) {
    out.token_speakers.push_back(token_speaker_indices(h, vocab));
    out.scored.push_back(teacher_forced_score(model, b, e, h.tokens,
                                              out.token_speakers.back(), vocab,
                                              kMbrPosteriorGamma));
    ad::Var s = item.length_norm
                    ? ad::scale(out.scored.back().total,
                                1.0 / static_cast<double>(h.tokens.size()))
                    : out.scored.back().total;
    out.norm_scores.push_back(s);
  }
  out.posterior = ad::softmax(ad::concat(out.norm_scores, 1), 1);
  ad::Tensor err({1, item.errors.size()});
  for (std::size_t h = 0; h < item.errors.size(); ++h)
    err[h] = static_cast<double>(item.errors[h]);
  out.loss = ad::reduce_sum(ad::mul(out.posterior, b.tape().constant(std::move(err))));
  return out;
}

struct MbrSeeds {
  std::vector<double> posterior;
  double expected_error = 0.0;
  std::vector<double> seed;  // per hypothesis: (1/|Y|) Phat (E - Ebar)
};

/// Closed-form error signal for every realized token and speaker position.
inline MbrSeeds mbr_closed_form_seeds(std::span<const double> posterior,
                                      const MbrBatchItem& item) {
  MbrSeeds out;
  out.posterior.assign(posterior.begin(), posterior.end());
  for (std::size_t h = 0; h < item.hyps.size(); ++h)
    out.expected_error += out.posterior[h] * static_cast<double>(item.errors[h]);
  for (std::size_t h = 0; h < item.hyps.size(); ++h) {
    const double len_factor =
        item.length_norm ? 1.0 / static_cast<double>(item.hyps[h].tokens.size()) : 1.0;
    out.seed.push_back(len_factor * out.posterior[h] *
                       (static_cast<double>(item.errors[h]) - out.expected_error));
  }
  return out;
}

/// Seeds placed at log o_{n,y_n} and log b_{n,s_n} nodes, zero elsewhere.
inline std::vector<std::pair<ad::Var, ad::Tensor>> mbr_seed_injections(
    const TapedMbr& taped, const MbrBatchItem& item, const MbrSeeds& seeds) {
  std::vector<std::pair<ad::Var, ad::Tensor>> out;
  for (std::size_t h = 0; h < item.hyps.size(); ++h) {
    const auto& sc = taped.scored[h];
    for (std::size_t n = 0; n < item.hyps[h].tokens.size(); ++n) {
      ad::Tensor go(sc.log_token_dists[n].shape());
      go[static_cast<std::size_t>(item.hyps[h].tokens[n])] = seeds.seed[h];
      out.emplace_back(sc.log_token_dists[n], std::move(go));
      ad::Tensor gb(sc.log_speaker_dists[n].shape());
      gb[taped.token_speakers[h][n]] = kMbrPosteriorGamma * seeds.seed[h];
      out.emplace_back(sc.log_speaker_dists[n], std::move(gb));
    }
  }
  return out;
}

struct ExhaustiveResult {
  double expected_error = 0.0;
  std::size_t num_sequences = 0;
  std::vector<TokenSeq> sequences;
  std::vector<double> posterior;
  std::vector<long> errors;
};

/// Expected error over every <eos>-terminated sequence of length <= max_len,
/// normalized over that set. Used as the N -> infinity reference.
inline ExhaustiveResult expected_error_exhaustive(
    const Model& model, const FeatureSequence& x, const SpeakerInventory& inv,
    const AttributedTranscript& reference, const Vocabulary& vocab, int max_len,
    bool length_norm = true) {
  if (vocab.size() > 5 || max_len > 4 || max_len < 1)
    throw CostBoundError("exhaustive enumeration limited to V <= 5, max_len <= 4");
  ad::Tape tape;
  Binder b(model, tape);
  const EncodedInput enc = model.encode(b, x, inv);
  ExhaustiveResult res;
  std::vector<double> log_joints;
  std::vector<std::size_t> lengths;

  Hypothesis cur;
  std::function<void(const DecoderState&, TokenId)> expand =
      [&](const DecoderState& st, TokenId prev) {
        DecoderStepOutput out = model.step(b, enc, st, prev);
        // copies: the recursion grows the tape and may move node storage
        const std::vector<double> lo = out.log_token_dist.value().storage();
        const std::vector<double> bb = out.speaker_dist.value().storage();
        for (TokenId i = 0; i < vocab.size(); ++i) {
          cur.tokens.push_back(i);
          cur.betas.push_back(bb);
          cur.token_logprobs.push_back(lo[static_cast<std::size_t>(i)]);
          if (i == vocab.eos_id()) {
            Hypothesis h = cur;
            h.finished = true;
            h.segment_speakers = segment_speaker_indices(h, vocab);
            log_joints.push_back(recompute_log_joint(h, vocab, kMbrPosteriorGamma));
            lengths.push_back(h.tokens.size());
            res.errors.push_back(
                sa_error_count(attribute_speakers(h, inv, vocab), reference));
            res.sequences.push_back(h.tokens);
          } else if (static_cast<int>(cur.tokens.size()) < max_len) {
            expand(out.next_state, i);
          }
          cur.tokens.pop_back();
          cur.betas.pop_back();
          cur.token_logprobs.pop_back();
        }
      };
  expand(model.initial_state(b, enc), Model::start_token(vocab));
  res.posterior = normalized_posterior(log_joints, lengths, length_norm);
  for (std::size_t h = 0; h < res.posterior.size(); ++h)
    res.expected_error += res.posterior[h] * static_cast<double>(res.errors[h]);
  res.num_sequences = res.sequences.size();
  return res;
}

}  // namespace sambr
