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

// End-to-end experiment drivers: SA-MMI training followed by SA-MBR
// fine-tuning with dev-based selection, plus the ablation grid (length
// normalization, N-best size, decoding beam size) rendered as CSV tables.

#pragma once

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sambr/decode.hpp"
#include "sambr/metrics.hpp"
#include "sambr/model.hpp"
#include "sambr/synthdata.hpp"
#include "sambr/train.hpp"

namespace sambr {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig mmi;
  TrainConfig mbr;
  BeamConfig decode{16, 4, 40, true, 1.0};
  int threads = 1;
};

/// Defaults used by the CLI and the end-to-end check. Learning rates are
/// tuned for the toy model (see README).
inline ExperimentConfig default_experiment_config(std::uint64_t seed = 1) {
  ExperimentConfig c;
  c.seed = seed;
  c.synth.seed = seed;
  c.model.vocab_size = c.synth.num_words + 2;
  c.model.feature_dim = c.synth.feature_dim;
  c.model.profile_dim = c.synth.feature_dim;

  c.mmi.epochs = 60;
  c.mmi.batch_size = 8;
  c.mmi.adam.lr = 2e-3;
  c.mmi.eval_beam = {4, 1, 40, true, 1.0};
  c.mmi.gamma = 0.1;

  c.mbr.epochs = 3;
  c.mbr.batch_size = 8;
  c.mbr.adam.lr = 1e-4;
  c.mbr.eval_every = 125;
  c.mbr.eval_beam = {4, 1, 40, true, 1.0};
  c.mbr.mbr.nbest_beam = {4, 4, 40, true, 1.0};
  return c;
}

/// Keep the seed-derived fields consistent after the caller edits `c`.
inline void finalize(ExperimentConfig& c) {
  c.synth.seed = c.seed;
  c.mmi.seed = c.seed;
  c.mbr.seed = c.seed;
  c.mmi.threads = c.threads;
  c.mbr.threads = c.threads;
  c.model.vocab_size = c.synth.num_words + 2;
  c.model.feature_dim = c.synth.feature_dim;
  c.model.profile_dim = c.synth.feature_dim;
}

struct StageLog {
  std::string stage;
  TrainLogRow row;
};
using StageProgressFn = std::function<void(const StageLog&)>;

struct PipelineResult {
  TrainResult mmi_train;
  TrainResult mbr_train;
  ParamSet mmi_params;
  ParamSet mbr_params;
  EvalResult mmi_dev;
  EvalResult mbr_dev;
};

inline Model train_mmi_model(const ExperimentConfig& c, const Dataset& d, TrainResult* log,
                             const StageProgressFn& progress = {}) {
  Model m(c.model, derive_seed(c.seed, "model-init"));
  auto r = train(m, Criterion::kSaMmi, d.train, d.dev, d.vocab, c.mmi, [&](const TrainLogRow& row) {
    if (progress) progress({"sa-mmi", row});
  });
  if (log) *log = std::move(r);
  return m;
}

inline Model train_mbr_model(const ExperimentConfig& c, const Dataset& d, const Model& start,
                             TrainResult* log, const StageProgressFn& progress = {}) {
  Model m = start;
  auto r = train(m, Criterion::kSaMbr, d.train, d.dev, d.vocab, c.mbr, [&](const TrainLogRow& row) {
    if (progress) progress({"sa-mbr", row});
  });
  if (log) *log = std::move(r);
  return m;
}

/// SA-MMI from scratch, then SA-MBR from the selected SA-MMI checkpoint; both
/// decoded on the dev split with `c.decode` (rank-1 hypotheses).
inline PipelineResult run_pipeline(const ExperimentConfig& c, const Dataset& d,
                                   const StageProgressFn& progress = {}) {
  PipelineResult out;
  Model mmi = train_mmi_model(c, d, &out.mmi_train, progress);
  out.mmi_params = mmi.params();
  out.mmi_dev = evaluate(mmi, d.dev, d.vocab, c.decode, false, c.threads);
  Model mbr = train_mbr_model(c, d, mmi, &out.mbr_train, progress);
  out.mbr_params = mbr.params();
  out.mbr_dev = evaluate(mbr, d.dev, d.vocab, c.decode, false, c.threads);
  return out;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline double rel_improvement_pct(double base, double x) {
  return base > 0.0 ? 100.0 * (base - x) / base : 0.0;
}

}  // namespace detail

/// Per speaker-count SA-WER of two systems plus the totals.
inline std::string comparison_csv(const EvalResult& mmi, const EvalResult& mbr) {
  std::string s = "subset,sa_mmi_sa_wer,sa_mbr_sa_wer,abs_improvement,rel_improvement_pct\n";
  auto row = [&](const std::string& name, const MetricReport& a, const MetricReport& b) {
    const double x = a.sa_wer_rate(), y = b.sa_wer_rate();
    s += name + "," + format_rate(x) + "," + format_rate(y) + "," + format_rate(x - y) + "," +
         detail::fmt("%.2f", detail::rel_improvement_pct(x, y)) + "\n";
  };
  for (const auto& [count, r] : mmi.by_count) {
    auto it = mbr.by_count.find(count);
    if (it != mbr.by_count.end()) row(std::to_string(count) + "spk", r, it->second);
  }
  row("total", mmi.total, mbr.total);
  return s;
}

/// Per speaker-count SER / WER / SA-WER of one system.
inline std::string breakdown_csv(const EvalResult& ev) {
  std::string s = "subset,ser,wer,sa_wer,samples\n";
  auto row = [&](const std::string& name, const MetricReport& r) {
    s += name + "," + format_rate(r.ser_rate()) + "," + format_rate(r.wer_rate()) + "," +
         format_rate(r.sa_wer_rate()) + "," + std::to_string(r.num_samples) + "\n";
  };
  for (const auto& [count, r] : ev.by_count) row(std::to_string(count) + "spk", r);
  row("total", ev.total);
  return s;
}

struct SweepConfig {
  ExperimentConfig base;
  std::vector<int> nbest_sizes{2, 4, 8};
  std::vector<int> beam_sizes{1, 2, 4, 8, 16};
};

struct SweepTables {
  std::string length_norm;  // rows: on/off; SA-MMI vs SA-MBR
  std::string nbest;        // rows: N used in SA-MBR training
  std::string beam;         // rows: decoding beam size; SA-MMI vs SA-MBR
};

/// One SA-MMI model is trained and shared; every SA-MBR variant starts from
/// it. Reported numbers are dev SA-WER of the rank-1 hypothesis.
inline SweepTables run_sweep(const SweepConfig& sc, const Dataset& d,
                             const StageProgressFn& progress = {}) {
  const ExperimentConfig& c = sc.base;
  SweepTables t;
  Model mmi = train_mmi_model(c, d, nullptr, progress);
  auto dev_sa_wer = [&](const Model& m, BeamConfig b) {
    b.nbest_size = 1;
    return evaluate(m, d.dev, d.vocab, b, false, c.threads).total.sa_wer_rate();
  };
  auto mbr_variant = [&](int nbest, bool ln) {
    ExperimentConfig v = c;
    v.mbr.mbr.nbest_beam.beam_size = nbest;
    v.mbr.mbr.nbest_beam.nbest_size = nbest;
    v.mbr.mbr.nbest_beam.length_norm = ln;
    v.mbr.eval_beam.length_norm = ln;
    return train_mbr_model(v, d, mmi, nullptr, progress);
  };
  const int default_n = c.mbr.mbr.nbest_beam.nbest_size;

  t.length_norm = "length_norm,sa_mmi_sa_wer,sa_mbr_sa_wer,rel_improvement_pct\n";
  std::map<int, Model> mbr_ln_on;
  for (bool ln : {false, true}) {
    BeamConfig b = c.decode;
    b.length_norm = ln;
    Model m = mbr_variant(default_n, ln);
    const double x = dev_sa_wer(mmi, b), y = dev_sa_wer(m, b);
    t.length_norm += std::string(ln ? "on" : "off") + "," + format_rate(x) + "," +
                     format_rate(y) + "," + detail::fmt("%.2f", detail::rel_improvement_pct(x, y)) +
                     "\n";
    if (ln) mbr_ln_on.emplace(default_n, std::move(m));
  }

  const double base = dev_sa_wer(mmi, c.decode);
  t.nbest = "nbest,sa_wer,rel_improvement_pct\n";
  t.nbest += "sa_mmi," + format_rate(base) + ",0.00\n";
  for (int n : sc.nbest_sizes) {
    if (!mbr_ln_on.count(n)) mbr_ln_on.emplace(n, mbr_variant(n, true));
    const double y = dev_sa_wer(mbr_ln_on.at(n), c.decode);
    t.nbest += std::to_string(n) + "," + format_rate(y) + "," +
               detail::fmt("%.2f", detail::rel_improvement_pct(base, y)) + "\n";
  }

  if (!mbr_ln_on.count(default_n)) mbr_ln_on.emplace(default_n, mbr_variant(default_n, true));
  const Model& mbr = mbr_ln_on.at(default_n);
  t.beam = "beam,sa_mmi_sa_wer,sa_mbr_sa_wer,rel_improvement_pct\n";
  for (int bsz : sc.beam_sizes) {
    BeamConfig b = c.decode;
    b.beam_size = bsz;
    const double x = dev_sa_wer(mmi, b), y = dev_sa_wer(mbr, b);
    t.beam += std::to_string(bsz) + "," + format_rate(x) + "," + format_rate(y) + "," +
              detail::fmt("%.2f", detail::rel_improvement_pct(x, y)) + "\n";
  }
  return t;
}

}  // namespace sambr
