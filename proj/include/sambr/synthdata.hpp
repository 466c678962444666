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

// Synthetic overlapped multi-talker task.
//
// Every speaker owns a fixed random unit signature and every word a fixed
// random signature. An utterance renders one frame block per token
// (token signature + speaker signature); S utterances are mixed by adding
// their frames at random start offsets, then Gaussian noise is added.
//
// Mixing follows the usual simulation recipe: training mixtures keep start
// times at least `min_offset_frames` apart, and in every mixture each
// utterance overlaps at least one other. Dev/test mixtures drop the start
// time constraint. References are serialized in start-time order, joined by
// <sc>. Inventories hold the S true speakers plus distractors, K uniform in
// [S, max_inventory], with profiles perturbed from the true signatures.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sambr/core.hpp"
#include "sambr/random.hpp"

namespace sambr {

enum class Split { kTrain, kDev, kTest };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

struct SynthConfig {
  std::uint64_t seed = 1;
  int num_words = 20;
  int num_speakers = 40;
  int feature_dim = 32;
  int frames_per_token = 3;
  int max_speakers = 3;
  int min_tokens = 2;
  int max_tokens = 5;
  int min_offset_frames = 3;
  int max_inventory = 8;
  double noise = 0.1;
  double profile_noise = 0.1;
  double token_scale = 1.0;
  double speaker_scale = 1.0;
  bool orthogonal_speakers = false;
  int train_size = 2000;
  int dev_size = 300;
  int test_size = 300;
  int max_retries = 200;

  void validate() const {
    if (max_speakers < 1) throw ConfigError("max_speakers must be >= 1");
    if (min_offset_frames < 1) throw ConfigError("min_offset_frames must be >= 1");
    if (noise < 0 || profile_noise < 0) throw ConfigError("noise must be >= 0");
    if (max_inventory < max_speakers)
      throw ConfigError("max_inventory must be >= max_speakers");
    if (num_speakers < max_inventory)
      throw ConfigError("population smaller than the inventory bound");
    if (num_words < 1 || feature_dim < 1 || frames_per_token < 1)
      throw ConfigError("num_words, feature_dim, frames_per_token must be >= 1");
    if (min_tokens < 1 || max_tokens < min_tokens)
      throw ConfigError("need 1 <= min_tokens <= max_tokens");
    if (orthogonal_speakers && num_speakers > feature_dim)
      throw ConfigError("orthogonal speakers need num_speakers <= feature_dim");
    if (train_size < 0 || dev_size < 0 || test_size < 0)
      throw ConfigError("split sizes must be >= 0");
  }
};

struct SampleMeta {
  std::uint64_t seed = 0;
  std::vector<int> offsets;         // start frame per utterance, SOT order
  std::vector<int> lengths;         // frames per utterance, SOT order
  std::vector<double> energy;       // mean clean frame energy per utterance
};

struct Sample {
  std::string id;
  FeatureSequence x;
  SerializedReference ref;
  SpeakerInventory inventory;
  int true_count = 0;
  SampleMeta meta;
};

/// Fixed signatures shared by every split of one configuration.
class SignatureBank {
 public:
  explicit SignatureBank(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng = make_rng(cfg.seed, "signatures");
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto F = static_cast<std::size_t>(cfg.feature_dim);
    speakers_.resize(static_cast<std::size_t>(cfg.num_speakers));
    for (auto& s : speakers_) {
      s.resize(F);
      for (double& v : s) v = nd(rng);
    }
    auto unit = [](std::vector<double>& s) {
      const double n = std::sqrt(dot(s, s));
      for (double& v : s) v /= n;
    };
    // Gram-Schmidt against the already normalized earlier signatures
    for (std::size_t i = 0; i < speakers_.size(); ++i) {
      if (cfg.orthogonal_speakers)
        for (std::size_t j = 0; j < i; ++j) {
          const double d = dot(speakers_[i], speakers_[j]);
          for (std::size_t f = 0; f < F; ++f) speakers_[i][f] -= d * speakers_[j][f];
        }
      unit(speakers_[i]);
    }
    for (auto& s : speakers_)
      for (double& v : s) v *= cfg.speaker_scale;
    tokens_.resize(static_cast<std::size_t>(cfg.num_words));
    for (auto& t : tokens_) {
      t.resize(F);
      for (double& v : t) v = nd(rng);
      const double n = std::sqrt(dot(t, t));
      for (double& v : t) v = cfg.token_scale * v / n;
    }
  }

  const std::vector<double>& speaker(int s) const {
    return speakers_.at(static_cast<std::size_t>(s));
  }
  const std::vector<double>& token(int w) const {
    return tokens_.at(static_cast<std::size_t>(w));
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

 private:
  std::vector<std::vector<double>> speakers_;
  std::vector<std::vector<double>> tokens_;
};

namespace detail {

inline bool spans_overlap(int a0, int a1, int b0, int b1) {
  return a0 < b1 && b0 < a1;
}

}  // namespace detail

/// One mixture with `num_speakers` talkers drawn from `rng`.
inline Sample generate_sample(const SynthConfig& cfg, const SignatureBank& bank,
                              const Vocabulary& vocab, int num_speakers,
                              Split split, Rng& rng) {
  if (num_speakers < 1 || num_speakers > cfg.max_speakers)
    throw ConfigError("speaker count out of range");
  const int fpt = cfg.frames_per_token;
  const bool constrain_starts = split == Split::kTrain;
  std::uniform_int_distribution<int> word(0, cfg.num_words - 1);
  std::uniform_int_distribution<int> len(cfg.min_tokens, cfg.max_tokens);
  std::normal_distribution<double> nd(0.0, 1.0);

  // Distinct participating speakers.
  std::vector<int> population(static_cast<std::size_t>(cfg.num_speakers));
  std::iota(population.begin(), population.end(), 0);
  std::shuffle(population.begin(), population.end(), rng);
  std::vector<int> talkers(population.begin(), population.begin() + num_speakers);

  std::vector<TokenSeq> words(static_cast<std::size_t>(num_speakers));
  for (auto& w : words) {
    w.resize(static_cast<std::size_t>(len(rng)));
    for (auto& t : w) t = word(rng);
  }

  std::vector<int> offsets(static_cast<std::size_t>(num_speakers), 0);
  bool ok = num_speakers == 1;
  for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
    int max_end = static_cast<int>(words[0].size()) * fpt;
    for (int i = 1; i < num_speakers; ++i) {
      std::uniform_int_distribution<int> start(0, max_end - 1);
      offsets[static_cast<std::size_t>(i)] = start(rng);
      max_end = std::max(max_end, offsets[static_cast<std::size_t>(i)] +
                                      static_cast<int>(words[static_cast<std::size_t>(i)].size()) * fpt);
    }
    ok = true;
    for (int i = 0; i < num_speakers && ok; ++i) {
      const int a0 = offsets[static_cast<std::size_t>(i)];
      const int a1 = a0 + static_cast<int>(words[static_cast<std::size_t>(i)].size()) * fpt;
      bool overlaps = false;
      for (int j = 0; j < num_speakers; ++j) {
        if (i == j) continue;
        const int b0 = offsets[static_cast<std::size_t>(j)];
        const int b1 = b0 + static_cast<int>(words[static_cast<std::size_t>(j)].size()) * fpt;
        if (constrain_starts && std::abs(a0 - b0) < cfg.min_offset_frames) ok = false;
        overlaps = overlaps || detail::spans_overlap(a0, a1, b0, b1);
      }
      ok = ok && overlaps;
    }
  }
  if (!ok) throw ConfigError("could not satisfy the mixing constraints");

  // Serialization order: start time, ties by draw order.
  std::vector<std::size_t> order(static_cast<std::size_t>(num_speakers));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return offsets[a] < offsets[b];
  });
  const int shift = offsets[order[0]];

  Sample s;
  s.true_count = num_speakers;
  int T = 0;
  for (std::size_t i : order) {
    const int o = offsets[i] - shift;
    const int l = static_cast<int>(words[i].size()) * fpt;
    s.meta.offsets.push_back(o);
    s.meta.lengths.push_back(l);
    T = std::max(T, o + l);
  }
  const auto F = static_cast<std::size_t>(cfg.feature_dim);
  std::vector<double> frames(static_cast<std::size_t>(T) * F, 0.0);
  for (std::size_t u = 0; u < order.size(); ++u) {
    const std::size_t i = order[u];
    const auto& spk = bank.speaker(talkers[i]);
    double energy = 0.0;
    for (std::size_t n = 0; n < words[i].size(); ++n) {
      const auto& tok = bank.token(words[i][n]);
      for (int f = 0; f < fpt; ++f) {
        const auto t = static_cast<std::size_t>(s.meta.offsets[u] +
                                                static_cast<int>(n) * fpt + f);
        for (std::size_t d = 0; d < F; ++d) {
          const double v = tok[d] + spk[d];
          frames[t * F + d] += v;
          energy += v * v;
        }
      }
    }
    s.meta.energy.push_back(energy / static_cast<double>(s.meta.lengths[u]));
  }
  for (double& v : frames) v += cfg.noise * nd(rng);
  s.x = FeatureSequence(static_cast<std::size_t>(T), F, std::move(frames));

  for (std::size_t u = 0; u < order.size(); ++u) {
    const std::size_t i = order[u];
    for (TokenId t : words[i]) {
      s.ref.tokens.push_back(t);
      s.ref.speakers.push_back(talkers[i]);
    }
    s.ref.tokens.push_back(u + 1 == order.size() ? vocab.eos_id() : vocab.sc_id());
    s.ref.speakers.push_back(talkers[i]);
  }

  // Inventory: true speakers plus distractors, in random order.
  std::uniform_int_distribution<int> inv_size(num_speakers, cfg.max_inventory);
  const int K = inv_size(rng);
  std::vector<int> members(talkers);
  for (int k = num_speakers; k < K; ++k) members.push_back(population[static_cast<std::size_t>(k)]);
  std::shuffle(members.begin(), members.end(), rng);
  std::vector<SpeakerProfile> profiles;
  for (int m : members) {
    std::vector<double> v = bank.speaker(m);
    for (double& x : v) x += cfg.profile_noise * nd(rng);
    profiles.emplace_back(m, std::move(v));
  }
  s.inventory = SpeakerInventory(std::move(profiles));
  return s;
}

/// Speaker count of the i-th sample of a split: cycles 1..S_max so that the
/// per-split distribution is uniform.
inline int balanced_speaker_count(const SynthConfig& cfg, int index) {
  return 1 + index % cfg.max_speakers;
}

inline std::vector<Sample> generate_split(const SynthConfig& cfg,
                                          const SignatureBank& bank,
                                          const Vocabulary& vocab, Split split) {
  const int n = split == Split::kTrain ? cfg.train_size
                : split == Split::kDev ? cfg.dev_size
                                       : cfg.test_size;
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, to_string(split), static_cast<std::uint64_t>(i));
    Rng rng(seed);
    Sample s = generate_sample(cfg, bank, vocab, balanced_speaker_count(cfg, i), split, rng);
    s.id = std::string(to_string(split)) + "-" + std::to_string(i);
    s.meta.seed = seed;
    out.push_back(std::move(s));
  }
  return out;
}

struct Dataset {
  SynthConfig config;
  Vocabulary vocab;
  std::vector<Sample> train, dev, test;
};

inline Dataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.config = cfg;
  d.vocab = Vocabulary::with_words(cfg.num_words);
  SignatureBank bank(cfg);
  d.train = generate_split(cfg, bank, d.vocab, Split::kTrain);
  d.dev = generate_split(cfg, bank, d.vocab, Split::kDev);
  d.test = generate_split(cfg, bank, d.vocab, Split::kTest);
  return d;
}

}  // namespace sambr
