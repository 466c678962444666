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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sambr/decode.hpp"
#include "sambr/random.hpp"

namespace sambr {
namespace {

struct Instance {
  Vocabulary vocab;
  Model model;
  FeatureSequence x;
  SpeakerInventory inv;
};

Instance make_instance(std::uint64_t seed, int words, int speakers = 3) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ModelConfig c;
  c.feature_dim = 3;
  c.encoder_dim = 4;
  c.speaker_dim = 3;
  c.profile_dim = 4;
  c.decoder_dim = 4;
  c.query_dim = 3;
  c.out_dim = 4;
  c.embed_dim = 3;
  c.attention_dim = 3;
  c.vocab_size = words + 2;
  c.init_range = 1.0;
  c.inventory_gain = 4.0;
  std::vector<double> f(4 * 3);
  for (double& v : f) v = n(rng);
  std::vector<SpeakerProfile> p;
  for (int k = 0; k < speakers; ++k) {
    std::vector<double> d(4);
    for (double& v : d) v = n(rng);
    p.emplace_back(100 + k, d);
  }
  return {Vocabulary::with_words(words), Model(c, seed), FeatureSequence(4, 3, f),
          SpeakerInventory(p)};
}

Hypothesis trace(TokenSeq y, std::vector<std::vector<double>> betas) {
  Hypothesis h;
  h.tokens = std::move(y);
  h.betas = std::move(betas);
  h.token_logprobs.assign(h.tokens.size(), -1.0);
  h.finished = true;
  return h;
}

TEST(SegmentSpeakers, ArgmaxOfSummedPosterior) {
  const Vocabulary v = Vocabulary::with_words(2);  // <sc>=2, <eos>=3
  // segment 1: per-step argmax is 0, 0, 1 but the sum favours speaker 1
  Hypothesis h = trace({0, 1, 2, 0, 3}, {{0.5, 0.4, 0.1},
                                         {0.5, 0.4, 0.1},
                                         {0.0, 1.0, 0.0},
                                         {0.2, 0.2, 0.6},
                                         {0.3, 0.3, 0.4}});
  EXPECT_EQ(segment_speaker_indices(h, v), (std::vector<std::size_t>{1, 2}));
  h.segment_speakers = segment_speaker_indices(h, v);
  EXPECT_EQ(token_speaker_indices(h, v), (std::vector<std::size_t>{1, 1, 1, 2, 2}));
  const double expect = -5.0 + 0.5 * (std::log(0.4) + std::log(0.4) + std::log(1.0) +
                                      std::log(0.6) + std::log(0.4));
  EXPECT_NEAR(recompute_log_joint(h, v, 0.5), expect, 1e-12);
  // ties go to the lower index
  EXPECT_EQ(argmax_index(std::vector<double>{0.2, 0.4, 0.4}), 1u);
}

TEST(SegmentSpeakers, AttributionMergesSameSpeaker) {
  const Vocabulary v = Vocabulary::with_words(2);
  SpeakerInventory inv({SpeakerProfile(7, {1, 0}), SpeakerProfile(9, {0, 1})});
  Hypothesis h = trace({0, 2, 1, 2, 1, 3}, {{1, 0}, {1, 0}, {0, 1}, {0, 1}, {1, 0}, {1, 0}});
  const auto t = attribute_speakers(h, inv, v);
  ASSERT_EQ(t.utterances.size(), 2u);
  EXPECT_EQ(t.utterances[0].speaker, 7);
  EXPECT_EQ(t.utterances[0].tokens, (TokenSeq{0, 1}));
  EXPECT_EQ(t.utterances[1].speaker, 9);
  EXPECT_EQ(estimate_speaker_count(t), 2);
  EXPECT_EQ(estimate_speaker_count(AttributedTranscript{}), 1);

  h.finished = false;
  EXPECT_THROW(attribute_speakers(h, inv, v), MalformedHypothesisError);
  Hypothesis bad = trace({0, 3}, {{1, 0}});
  EXPECT_THROW(segment_speaker_indices(bad, v), MalformedHypothesisError);
  Hypothesis open = trace({0, 2, 1}, {{1, 0}, {1, 0}, {1, 0}});
  open.segment_speakers = segment_speaker_indices(open, v);
  EXPECT_THROW(token_speaker_indices(open, v), MalformedHypothesisError);
}

TEST(BeamSearch, ExhaustiveBeamMatchesEnumeration) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int words = 1 + static_cast<int>(seed % 3);
    const int L = 2 + static_cast<int>(seed % 2);
    Instance s = make_instance(seed, words);
    const bool ln = seed % 2 == 0;
    const int V = s.vocab.size();
    BeamConfig bc{static_cast<int>(std::pow(V, L)), 3, L, ln, 1.0};
    const NBestList nb = beam_search(s.model, s.x, s.inv, s.vocab, bc);
    auto all = oracle::enumerate_sequences(s.model, s.x, s.inv, s.vocab, L, 1.0, ln);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.norm_score != b.norm_score ? a.norm_score > b.norm_score : a.tokens < b.tokens;
    });
    ASSERT_EQ(nb.entries.size(), std::min<std::size_t>(3, all.size()));
    for (std::size_t r = 0; r < nb.entries.size(); ++r) {
      EXPECT_EQ(nb.entries[r].hyp.tokens, all[r].tokens) << "seed " << seed << " rank " << r;
      EXPECT_NEAR(nb.entries[r].norm_score, all[r].norm_score, 1e-10);
    }
  }
}

TEST(BeamSearch, OutputInvariants) {
  Instance s = make_instance(5, 4);
  BeamConfig bc{6, 4, 8, true, 1.0};
  const NBestList nb = beam_search(s.model, s.x, s.inv, s.vocab, bc);
  ASSERT_FALSE(nb.entries.empty());
  ASSERT_LE(nb.entries.size(), 4u);
  for (std::size_t r = 0; r < nb.entries.size(); ++r) {
    const auto& e = nb.entries[r];
    EXPECT_TRUE(e.hyp.finished);
    EXPECT_EQ(e.hyp.tokens.back(), s.vocab.eos_id());
    EXPECT_EQ(std::count(e.hyp.tokens.begin(), e.hyp.tokens.end(), s.vocab.eos_id()), 1);
    EXPECT_LE(e.hyp.tokens.size(), 8u);
    EXPECT_EQ(e.hyp.segment_speakers, segment_speaker_indices(e.hyp, s.vocab));
    EXPECT_NEAR(e.hyp.log_joint, recompute_log_joint(e.hyp, s.vocab, 1.0), 1e-9);
    EXPECT_NEAR(e.norm_score, e.hyp.log_joint / static_cast<double>(e.hyp.tokens.size()),
                1e-12);
    if (r > 0) {
      EXPECT_GE(nb.entries[r - 1].norm_score, e.norm_score);
    }
    for (std::size_t q = 0; q < r; ++q) EXPECT_NE(nb.entries[q].hyp.tokens, e.hyp.tokens);
  }
  // deterministic
  const NBestList again = beam_search(s.model, s.x, s.inv, s.vocab, bc);
  ASSERT_EQ(again.entries.size(), nb.entries.size());
  for (std::size_t r = 0; r < nb.entries.size(); ++r)
    EXPECT_EQ(again.entries[r].hyp.tokens, nb.entries[r].hyp.tokens);
}

TEST(BeamSearch, ForcedEosMarksTruncation) {
  Instance s = make_instance(9, 4);
  BeamConfig bc{1, 1, 1, true, 1.0};
  // with a single step every hypothesis is either <eos> or forced to it
  const NBestList nb = beam_search(s.model, s.x, s.inv, s.vocab, bc);
  ASSERT_EQ(nb.entries.size(), 1u);
  EXPECT_EQ(nb.entries[0].hyp.tokens, TokenSeq{s.vocab.eos_id()});
  bool found_truncated = false;
  for (std::uint64_t seed = 1; seed <= 20 && !found_truncated; ++seed) {
    Instance t = make_instance(seed, 4);
    const auto r = beam_search(t.model, t.x, t.inv, t.vocab, BeamConfig{1, 1, 3, false, 1.0});
    const auto& h = r.entries.at(0).hyp;
    EXPECT_EQ(h.tokens.back(), t.vocab.eos_id());
    if (h.truncated) {
      found_truncated = true;
      EXPECT_EQ(h.tokens.size(), 3u);
    }
  }
  EXPECT_TRUE(found_truncated);
}

TEST(BeamSearch, ConfigValidation) {
  Instance s = make_instance(1, 2);
  EXPECT_THROW(beam_search(s.model, s.x, s.inv, s.vocab, BeamConfig{0, 1, 5, true, 1.0}),
               ConfigError);
  EXPECT_THROW(beam_search(s.model, s.x, s.inv, s.vocab, BeamConfig{2, 3, 5, true, 1.0}),
               ConfigError);
  EXPECT_THROW(beam_search(s.model, s.x, s.inv, s.vocab, BeamConfig{2, 1, 0, true, 1.0}),
               ConfigError);
  EXPECT_THROW(beam_search(s.model, s.x, s.inv, s.vocab, BeamConfig{2, 1, 5, true, -1.0}),
               ConfigError);
}

}  // namespace
}  // namespace sambr
