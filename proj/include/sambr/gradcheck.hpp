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

// Self-check of the SA-MBR gradient on tiny random instances. Three routes
// are compared for the same frozen N-best list:
//   (a) reverse-mode autodiff through the expected-error loss,
//   (b) closed-form per-position seeds injected at the log o / log b nodes,
//   (c) central finite differences of the loss.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sambr/autodiff.hpp"
#include "sambr/core.hpp"
#include "sambr/decode.hpp"
#include "sambr/metrics.hpp"
#include "sambr/model.hpp"
#include "sambr/random.hpp"
#include "sambr/risk.hpp"

namespace sambr {

struct TinyInstance {
  Vocabulary vocab;
  Model model;
  FeatureSequence x;
  SpeakerInventory inventory;
  AttributedTranscript reference;
  MbrBatchItem item;
};

/// Random model with V <= 8 (incl. specials), K <= 4, N <= 4 and |Y| <= 8.
inline TinyInstance make_tiny_instance(std::uint64_t seed, int nbest = 0) {
  Rng rng = make_rng(seed, "tiny-instance");
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  TinyInstance t;
  const int words = uni(2, 6);
  t.vocab = Vocabulary::with_words(words);
  ModelConfig mc;
  mc.feature_dim = 3;
  mc.encoder_dim = 4;
  mc.speaker_dim = 3;
  mc.profile_dim = 3;
  mc.decoder_dim = 4;
  mc.query_dim = 3;
  mc.out_dim = 4;
  mc.embed_dim = 3;
  mc.attention_dim = 3;
  mc.vocab_size = t.vocab.size();
  mc.init_range = 0.5;
  mc.inventory_gain = 2.0;
  t.model = Model(mc, rng());

  const int T = uni(3, 6);
  std::vector<double> frames(static_cast<std::size_t>(T * mc.feature_dim));
  for (double& v : frames) v = gauss(rng);
  t.x = FeatureSequence(static_cast<std::size_t>(T), 3, std::move(frames));

  const int K = uni(1, 4);
  std::vector<SpeakerProfile> profiles;
  for (int k = 0; k < K; ++k) {
    std::vector<double> v(3);
    for (double& e : v) e = gauss(rng);
    profiles.emplace_back(10 + 7 * k, std::move(v));
  }
  std::shuffle(profiles.begin(), profiles.end(), rng);
  t.inventory = SpeakerInventory(std::move(profiles));

  auto random_segments = [&](int max_len) {
    // tokens (<= max_len incl. <eos>) with random <sc> splits
    const int len = uni(1, max_len);
    TokenSeq y;
    for (int i = 0; i + 1 < len; ++i)
      y.push_back(uni(0, 3) == 0 && !y.empty() && y.back() != t.vocab.sc_id()
                      ? t.vocab.sc_id()
                      : uni(0, words - 1));
    y.push_back(t.vocab.eos_id());
    return y;
  };

  {
    const TokenSeq y = random_segments(8);
    std::vector<Utterance> utts;
    for (auto& seg : segment_by_sc(y, t.vocab))
      utts.push_back({t.inventory[static_cast<std::size_t>(uni(0, K - 1))].speaker_id(), seg});
    t.reference = merge_utterances(utts);
    if (t.reference.utterances.empty())
      t.reference.utterances.push_back({t.inventory[0].speaker_id(), {0}});
  }

  // Resample until the errors differ, otherwise the gradient is trivially 0.
  const int N = nbest > 0 ? nbest : uni(2, 4);
  t.item.length_norm = uni(0, 3) != 0;
  for (int attempt = 0; attempt < 50; ++attempt) {
    t.item.hyps.clear();
    t.item.errors.clear();
    for (int h = 0; h < N; ++h) {
      Hypothesis hyp;
      hyp.tokens = random_segments(8);
      hyp.finished = true;
      std::vector<Utterance> utts;
      for (auto& seg : segment_by_sc(hyp.tokens, t.vocab)) {
        const auto k = static_cast<std::size_t>(uni(0, K - 1));
        hyp.segment_speakers.push_back(k);
        utts.push_back({t.inventory[k].speaker_id(), seg});
      }
      t.item.hyps.push_back(std::move(hyp));
      t.item.errors.push_back(sa_error_count(merge_utterances(utts), t.reference));
    }
    if (N == 1 || std::adjacent_find(t.item.errors.begin(), t.item.errors.end(),
                                     std::not_equal_to<>()) != t.item.errors.end())
      break;
  }
  return t;
}

/// Ebar for the frozen item under the current parameters (no gradient).
inline double expected_error_value(const Model& m, const TinyInstance& t) {
  ad::Tape tape;
  Binder b(m, tape);
  EncodedInput e = m.encode(b, t.x, t.inventory);
  return sa_mbr_loss(m, b, e, t.item, t.vocab).loss.item();
}

inline ad::GradientMap autodiff_gradient(const Model& m, const TinyInstance& t) {
  ad::Tape tape;
  Binder b(m, tape);
  EncodedInput e = m.encode(b, t.x, t.inventory);
  return tape.backward(sa_mbr_loss(m, b, e, t.item, t.vocab).loss);
}

inline ad::GradientMap injected_gradient(const Model& m, const TinyInstance& t) {
  ad::Tape tape;
  Binder b(m, tape);
  EncodedInput e = m.encode(b, t.x, t.inventory);
  TapedMbr taped = sa_mbr_loss(m, b, e, t.item, t.vocab);
  const auto& post = taped.posterior.value();
  MbrSeeds seeds = mbr_closed_form_seeds(post.storage(), t.item);
  return tape.backward_from(mbr_seed_injections(taped, t.item, seeds));
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_difference(const ad::GradientMap& a, const ad::GradientMap& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t len = std::max(s < a.size() ? a[s].size() : 0, s < b.size() ? b[s].size() : 0);
    for (std::size_t i = 0; i < len; ++i) {
      const double x = s < a.size() && i < a[s].size() ? a[s][i] : 0.0;
      const double y = s < b.size() && i < b[s].size() ? b[s][i] : 0.0;
      num += (x - y) * (x - y);
      na += x * x;
      nb += y * y;
    }
  }
  const double den = std::sqrt(std::max(na, nb));
  return den == 0.0 ? 0.0 : std::sqrt(num) / den;
}

struct GradcheckCase {
  std::uint64_t seed = 0;
  double inject_rel_err = 0.0;  // (a) vs (b)
  double fd_rel_err = 0.0;      // (a) vs (c) over the probed coordinates
  std::size_t probes = 0;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_inject_rel_err = 0.0;
  double max_fd_rel_err = 0.0;
  bool passed = false;
};

/// Finite-difference probes are taken on `probes` random coordinates; the
/// relative error is the norm ratio over that coordinate subset.
inline GradcheckReport run_gradcheck(std::uint64_t seed, int instances = 20, int probes = 24,
                                     double h = 1e-5) {
  GradcheckReport rep;
  for (int i = 0; i < instances; ++i) {
    GradcheckCase c;
    c.seed = derive_seed(seed, "gradcheck", static_cast<std::uint64_t>(i));
    TinyInstance t = make_tiny_instance(c.seed);
    const ad::GradientMap ga = autodiff_gradient(t.model, t);
    c.inject_rel_err = relative_difference(ga, injected_gradient(t.model, t));

    Rng rng = make_rng(c.seed, "fd-probes");
    Model m = t.model;
    double num = 0.0, den_a = 0.0, den_f = 0.0;
    for (int p = 0; p < probes; ++p) {
      const int slot = std::uniform_int_distribution<int>(0, m.params().size() - 1)(rng);
      auto& w = m.params()[slot];
      const auto idx = std::uniform_int_distribution<std::size_t>(0, w.size() - 1)(rng);
      const double orig = w[idx];
      w[idx] = orig + h;
      const double up = expected_error_value(m, t);
      w[idx] = orig - h;
      const double dn = expected_error_value(m, t);
      w[idx] = orig;
      const double fd = (up - dn) / (2.0 * h);
      const auto s = static_cast<std::size_t>(slot);
      const double an = s < ga.size() && idx < ga[s].size() ? ga[s][idx] : 0.0;
      num += (an - fd) * (an - fd);
      den_a += an * an;
      den_f += fd * fd;
      ++c.probes;
    }
    const double den = std::sqrt(std::max(den_a, den_f));
    c.fd_rel_err = den < 1e-9 ? std::sqrt(num) : std::sqrt(num) / den;
    rep.max_inject_rel_err = std::max(rep.max_inject_rel_err, c.inject_rel_err);
    rep.max_fd_rel_err = std::max(rep.max_fd_rel_err, c.fd_rel_err);
    rep.cases.push_back(c);
  }
  rep.passed = rep.max_inject_rel_err < 1e-6 && rep.max_fd_rel_err < 1e-3;
  return rep;
}

}  // namespace sambr
