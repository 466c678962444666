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

#include <cmath>

#include "sambr/experiment.hpp"

namespace sambr {
namespace {

struct Fixture {
  Dataset data;
  ModelConfig model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    SynthConfig s;
    s.seed = 11;
    s.feature_dim = 8;
    s.num_words = 6;
    s.num_speakers = 10;
    s.max_inventory = 4;
    s.train_size = 24;
    s.dev_size = 9;
    s.test_size = 0;
    ModelConfig m;
    m.feature_dim = m.profile_dim = 8;
    m.vocab_size = 8;
    m.encoder_dim = m.decoder_dim = m.out_dim = 6;
    m.speaker_dim = m.query_dim = m.embed_dim = m.attention_dim = 4;
    return Fixture{generate_dataset(s), m};
  }();
  return f;
}

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.adam.lr = 5e-3;
  c.eval_beam = {2, 1, 12, true, 1.0};
  c.mbr.nbest_beam = {2, 2, 12, true, 1.0};
  return c;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet p;
  p.add("w", ad::Tensor::row({1.0, -2.0, 0.5}));
  ad::GradientMap g{ad::Tensor::row({0.3, -4.0, 0.0})};
  AdamConfig c;
  c.lr = 0.1;
  c.clip_norm = 0.0;
  Adam opt(c);
  opt.step(p, g);
  EXPECT_NEAR(p[0][0], 0.9, 1e-7);
  EXPECT_NEAR(p[0][1], -1.9, 1e-7);
  EXPECT_EQ(p[0][2], 0.5);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ClippingRescalesGradient) {
  ad::GradientMap g{ad::Tensor::row({3.0, 4.0})};
  EXPECT_DOUBLE_EQ(global_norm(g), 5.0);
  ParamSet a, b;
  a.add("w", ad::Tensor::row({0.0, 0.0}));
  b.add("w", ad::Tensor::row({0.0, 0.0}));
  AdamConfig c;
  c.clip_norm = 1.0;
  Adam clipped(c);
  clipped.step(a, g);
  clipped.step(a, g);
  c.clip_norm = 0.0;
  Adam plain(c);
  plain.step(b, ad::GradientMap{ad::Tensor::row({0.6, 0.8})});
  plain.step(b, ad::GradientMap{ad::Tensor::row({0.6, 0.8})});
  EXPECT_NEAR(a[0][0], b[0][0], 1e-15);
  EXPECT_NEAR(a[0][1], b[0][1], 1e-15);
}

TEST(Adam, CosineSchedule) {
  AdamConfig c;
  c.lr = 2.0;
  EXPECT_EQ(scheduled_lr(c, 0, 100), 2.0);
  EXPECT_EQ(scheduled_lr(c, 99, 100), 2.0);
  c.lr_final_fraction = 0.1;
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 0, 101), 2.0);
  EXPECT_NEAR(scheduled_lr(c, 50, 101), 1.1, 1e-12);
  EXPECT_NEAR(scheduled_lr(c, 100, 101), 0.2, 1e-12);
  for (long i = 1; i < 101; ++i) EXPECT_LE(scheduled_lr(c, i, 101), scheduled_lr(c, i - 1, 101));
}

TEST(Accumulate, SumsPerSlot) {
  ad::GradientMap dst;
  accumulate(dst, {ad::Tensor::row({1, 2}), ad::Tensor()});
  accumulate(dst, {ad::Tensor::row({3, 4}), ad::Tensor::row({5})});
  EXPECT_EQ(dst[0].storage(), (std::vector<double>{4, 6}));
  EXPECT_EQ(dst[1].storage(), (std::vector<double>{5}));
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const auto& f = fixture();
  const Model m(f.model, 5);
  const BeamConfig bc{3, 2, 12, true, 1.0};
  const EvalResult a = evaluate(m, f.data.dev, f.data.vocab, bc, true, 1);
  const EvalResult b = evaluate(m, f.data.dev, f.data.vocab, bc, true, 3);
  EXPECT_EQ(a.total.sa_wer.errors(), b.total.sa_wer.errors());
  EXPECT_EQ(a.total.ser.errors(), b.total.ser.errors());
  EXPECT_EQ(a.confusion.to_csv(), b.confusion.to_csv());
  ASSERT_EQ(a.nbest.size(), f.data.dev.size());
  EXPECT_EQ(a.nbest[4].ref_id, f.data.dev[4].id);
  MetricReport sum;
  for (const auto& [k, r] : a.by_count) sum += r;
  EXPECT_EQ(sum.sa_wer.errors(), a.total.sa_wer.errors());
  EXPECT_EQ(sum.num_samples, static_cast<long>(f.data.dev.size()));
}

TEST(Train, SaMmiReducesLossAndIsDeterministic) {
  const auto& f = fixture();
  auto corpus_loss = [&](const Model& m) {
    double l = 0.0;
    for (const auto& s : f.data.train) l += mmi_sample_gradient(m, s, f.data.vocab, 0.1).loss;
    return l;
  };
  Model a(f.model, 2), b(f.model, 2);
  const double before = corpus_loss(a);
  TrainConfig c = quick(6);
  c.keep_best = false;
  const TrainResult ra = train(a, Criterion::kSaMmi, f.data.train, {}, f.data.vocab, c);
  train(b, Criterion::kSaMmi, f.data.train, {}, f.data.vocab, c);
  EXPECT_TRUE(a.params() == b.params());
  EXPECT_EQ(ra.log.size(), 36u);
  EXPECT_LT(corpus_loss(a), before - 1.0);
}

TEST(Train, KeepBestRestoresSelectedParameters) {
  const auto& f = fixture();
  Model m(f.model, 3);
  TrainConfig c = quick(3);
  c.eval_every = 2;
  const TrainResult r = train(m, Criterion::kSaMmi, f.data.train, f.data.dev, f.data.vocab, c);
  int evals = 0;
  for (const auto& row : r.log) evals += !std::isnan(row.dev_sa_wer);
  EXPECT_EQ(evals, 9);
  ASSERT_GT(r.best_iteration, 0);
  EXPECT_EQ(r.log[static_cast<std::size_t>(r.best_iteration - 1)].dev_sa_wer, r.best_dev_sa_wer);
  const double now = evaluate(m, f.data.dev, f.data.vocab, c.eval_beam).total.sa_wer_rate();
  EXPECT_EQ(now, r.best_dev_sa_wer);
}

TEST(Train, SaMbrRunsFromTrainedModel) {
  const auto& f = fixture();
  Model m(f.model, 4);
  TrainConfig c = quick(4);
  c.keep_best = false;
  train(m, Criterion::kSaMmi, f.data.train, {}, f.data.vocab, c);
  TrainConfig mc = quick(1);
  mc.adam.lr = 1e-3;
  mc.keep_best = false;
  const TrainResult r = train(m, Criterion::kSaMbr, f.data.train, {}, f.data.vocab, mc);
  ASSERT_EQ(r.log.size(), 6u);
  for (const auto& row : r.log) {
    EXPECT_GE(row.loss, 0.0);
    EXPECT_TRUE(std::isfinite(row.loss));
  }
  // a cached N-best list gives the same step as a fresh one on the first epoch
  Model x = m, y = m;
  TrainConfig cached = mc;
  cached.nbest_cache_interval = 2;
  train(x, Criterion::kSaMbr, f.data.train, {}, f.data.vocab, mc);
  train(y, Criterion::kSaMbr, f.data.train, {}, f.data.vocab, cached);
  EXPECT_TRUE(x.params() == y.params());
}

TEST(Train, ConfigErrors) {
  const auto& f = fixture();
  Model m(f.model, 1);
  TrainConfig c = quick(1);
  c.batch_size = 0;
  EXPECT_THROW(train(m, Criterion::kSaMmi, f.data.train, {}, f.data.vocab, c), ConfigError);
  EXPECT_THROW(train(m, Criterion::kSaMmi, {}, {}, f.data.vocab, quick(1)), ConfigError);
}

TEST(Experiment, DefaultsAndFinalize) {
  ExperimentConfig c = default_experiment_config(7);
  c.synth.num_words = 12;
  c.synth.feature_dim = 16;
  c.threads = 2;
  finalize(c);
  EXPECT_EQ(c.mmi.seed, 7u);
  EXPECT_EQ(c.mbr.threads, 2);
  EXPECT_EQ(c.model.vocab_size, 14);
  EXPECT_EQ(c.model.profile_dim, 16);
  EXPECT_EQ(c.mbr.mbr.nbest_beam.nbest_size, 4);
  EXPECT_TRUE(c.decode.length_norm);
  EXPECT_EQ(c.decode.beam_size, 16);
}

TEST(Experiment, ComparisonTable) {
  EvalResult a, b;
  const AttributedTranscript ref{{{1, {0, 1, 2, 3}}}};
  a.total.add(AttributedTranscript{{{1, {0}}}}, ref);  // 3 / 4
  b.total.add(AttributedTranscript{{{1, {0, 1, 2}}}}, ref);  // 1 / 4
  a.by_count[1] = a.total;
  b.by_count[1] = b.total;
  EXPECT_EQ(comparison_csv(a, b),
            "subset,sa_mmi_sa_wer,sa_mbr_sa_wer,abs_improvement,rel_improvement_pct\n"
            "1spk,0.7500,0.2500,0.5000,66.67\n"
            "total,0.7500,0.2500,0.5000,66.67\n");
  EXPECT_EQ(breakdown_csv(b), "subset,ser,wer,sa_wer,samples\n"
                              "1spk,0.0000,0.2500,0.2500,1\n"
                              "total,0.0000,0.2500,0.2500,1\n");
}

}  // namespace
}  // namespace sambr
