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

// Optimization and evaluation loops: Adam, per-sample SA-MMI / SA-MBR
// gradients, minibatch training with dev-based model selection, and
// corpus decoding + scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "sambr/decode.hpp"
#include "sambr/metrics.hpp"
#include "sambr/model.hpp"
#include "sambr/random.hpp"
#include "sambr/risk.hpp"
#include "sambr/synthdata.hpp"

namespace sambr {

/// Accumulate `src` into `dst` (slot-aligned; missing slots are skipped).
inline void accumulate(ad::GradientMap& dst, const ad::GradientMap& src,
                       double weight = 1.0) {
  if (dst.size() < src.size()) dst.resize(src.size());
  for (std::size_t s = 0; s < src.size(); ++s) {
    if (src[s].size() == 0) continue;
    if (dst[s].size() == 0) dst[s] = ad::Tensor(src[s].shape());
    for (std::size_t i = 0; i < src[s].size(); ++i) dst[s][i] += weight * src[s][i];
  }
}

inline double global_norm(const ad::GradientMap& g) {
  double s = 0.0;
  for (const auto& t : g)
    for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables global-norm clipping
  double lr_final_fraction = 1.0;  // cosine decay to lr * this; 1 = constant
};

/// Cosine schedule from lr (iteration 0) to lr * final_fraction (last).
inline double scheduled_lr(const AdamConfig& c, long it, long total) {
  if (c.lr_final_fraction == 1.0 || total <= 1) return c.lr;
  const double pi = std::acos(-1.0);
  const double t = static_cast<double>(std::min(it, total - 1)) / static_cast<double>(total - 1);
  const double f = c.lr_final_fraction + (1.0 - c.lr_final_fraction) * 0.5 * (1.0 + std::cos(pi * t));
  return c.lr * f;
}

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamSet& params, const ad::GradientMap& grads) {
    if (m_.empty()) {
      for (int s = 0; s < params.size(); ++s) {
        m_.emplace_back(params[s].shape());
        v_.emplace_back(params[s].shape());
      }
    }
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      const double n = global_norm(grads);
      if (n > cfg_.clip_norm) scale = cfg_.clip_norm / n;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t s = 0; s < grads.size(); ++s) {
      if (grads[s].size() == 0) continue;
      auto& p = params[static_cast<int>(s)];
      auto& m = m_[s];
      auto& v = v_[s];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = scale * grads[s][i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        p[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
    }
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::vector<ad::Tensor> m_, v_;
  long t_ = 0;
};

struct SampleGradient {
  double loss = 0.0;
  ad::GradientMap grads;
  std::size_t nbest = 0;
};

inline SampleGradient mmi_sample_gradient(const Model& model, const Sample& s,
                                          const Vocabulary& vocab, double gamma) {
  ad::Tape tape;
  Binder b(model, tape);
  ad::Var loss = sa_mmi_loss(model, b, s.ref, s.x, s.inventory, vocab, gamma);
  SampleGradient out;
  out.loss = loss.item();
  out.grads = tape.backward(loss);
  return out;
}

struct MbrConfig {
  BeamConfig nbest_beam{4, 4, 40, true, 1.0};  // N-best generation
  double mmi_weight = 0.0;                     // optional SA-MMI interpolation
  double mmi_gamma = 0.1;
};

/// SA-MBR gradient of one sample for a fixed (freshly decoded) N-best list.
inline SampleGradient mbr_sample_gradient(const Model& model, const Sample& s,
                                          const Vocabulary& vocab,
                                          const MbrConfig& cfg,
                                          const NBestList* cached = nullptr) {
  NBestList nb = cached ? *cached
                        : beam_search(model, s.x, s.inventory, vocab, cfg.nbest_beam);
  MbrBatchItem item =
      make_mbr_item(nb, reference_transcript(s.ref, vocab), cfg.nbest_beam.length_norm);
  ad::Tape tape;
  Binder b(model, tape);
  EncodedInput enc = model.encode(b, s.x, s.inventory);
  TapedMbr taped = sa_mbr_loss(model, b, enc, item, vocab);
  ad::Var loss = taped.loss;
  if (cfg.mmi_weight > 0.0) {
    auto idx = speaker_indices(s.ref.speakers, s.inventory);
    ad::Var mmi = ad::scale(
        teacher_forced_score(model, b, enc, s.ref.tokens, idx, vocab, cfg.mmi_gamma).total,
        -cfg.mmi_weight);
    loss = ad::add(loss, mmi);
  }
  SampleGradient out;
  out.loss = taped.loss.item();
  out.grads = tape.backward(loss);
  out.nbest = item.hyps.size();
  return out;
}

/// Decoding + scoring of a corpus, broken down by true speaker count.
struct EvalResult {
  MetricReport total;
  std::map<int, MetricReport> by_count;
  SpeakerCountConfusion confusion;
  std::vector<NBestList> nbest;  // only when requested
  std::vector<AttributedTranscript> hypotheses;
};

/// Decodes in `threads` workers (each owning its samples' tapes); results are
/// reduced in sample order so the report does not depend on the thread count.
inline EvalResult evaluate(const Model& model, const std::vector<Sample>& samples,
                           const Vocabulary& vocab, const BeamConfig& beam,
                           bool keep_nbest = false, int threads = 1) {
  std::vector<NBestList> decoded(samples.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < samples.size(); i += stride)
      decoded[i] = beam_search(model, samples[i].x, samples[i].inventory, vocab, beam);
  };
  const auto nt = static_cast<std::size_t>(std::max(1, threads));
  if (nt == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (std::size_t t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        try {
          work(t, nt);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }

  EvalResult out;
  std::vector<std::pair<int, int>> counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    NBestList& nb = decoded[i];
    nb.ref_id = s.id;
    AttributedTranscript hyp =
        nb.entries.empty() ? AttributedTranscript{} : nb.entries.front().transcript;
    const AttributedTranscript ref = reference_transcript(s.ref, vocab);
    MetricReport r;
    r.add(hyp, ref);
    out.total += r;
    out.by_count[s.true_count] += r;
    counts.emplace_back(estimate_speaker_count(hyp), s.true_count);
    out.hypotheses.push_back(std::move(hyp));
    if (keep_nbest) out.nbest.push_back(std::move(nb));
  }
  out.confusion = speaker_count_confusion(counts);
  return out;
}

struct TrainLogRow {
  long iteration = 0;
  int epoch = 0;
  double loss = 0.0;  // mean over the minibatch (SA-MMI loss or Ebar)
  double dev_sa_wer = std::numeric_limits<double>::quiet_NaN();
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  AdamConfig adam;
  std::uint64_t seed = 1;
  int eval_every = 0;        // iterations between dev evaluations, 0 = per epoch
  BeamConfig eval_beam{16, 1, 40, true, 1.0};
  int eval_limit = 0;        // dev samples used for selection, 0 = all
  bool keep_best = true;     // restore the best dev checkpoint at the end
  double gamma = 0.1;        // SA-MMI speaker scale
  int nbest_cache_interval = 1;  // SA-MBR: epochs between N-best refreshes
  MbrConfig mbr;
  int threads = 1;               // dev decoding workers
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double best_dev_sa_wer = std::numeric_limits<double>::infinity();
  long best_iteration = -1;
};

enum class Criterion { kSaMmi, kSaMbr };

using ProgressFn = std::function<void(const TrainLogRow&)>;

/// Minibatch training with either criterion. Every `eval_every` iterations
/// the dev SA-WER is measured; with keep_best the best evaluated parameters
/// are restored at the end (the starting point is not a candidate).
inline TrainResult train(Model& model, Criterion criterion,
                         const std::vector<Sample>& train_set,
                         const std::vector<Sample>& dev_set, const Vocabulary& vocab,
                         const TrainConfig& cfg, const ProgressFn& progress = {}) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train_set.empty()) throw ConfigError("empty training set");
  Adam opt(cfg.adam);
  Rng rng = make_rng(cfg.seed, criterion == Criterion::kSaMmi ? "train-mmi" : "train-mbr");
  TrainResult res;
  std::optional<ParamSet> best;
  std::vector<Sample> dev_subset(
      dev_set.begin(),
      dev_set.begin() + static_cast<long>(cfg.eval_limit > 0
                                              ? std::min<std::size_t>(dev_set.size(), static_cast<std::size_t>(cfg.eval_limit))
                                              : dev_set.size()));
  std::vector<std::optional<NBestList>> cache(train_set.size());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const long per_epoch =
      (static_cast<long>(train_set.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long eval_every = cfg.eval_every > 0 ? cfg.eval_every : per_epoch;
  long it = 0;

  auto maybe_eval = [&](TrainLogRow& row) {
    if (dev_subset.empty() || it % eval_every != 0) return;
    const double w = evaluate(model, dev_subset, vocab, cfg.eval_beam, false, cfg.threads).total.sa_wer_rate();
    row.dev_sa_wer = w;
    if (w < res.best_dev_sa_wer) {
      res.best_dev_sa_wer = w;
      res.best_iteration = it;
      if (cfg.keep_best) best = model.params();
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const bool refresh = cfg.nbest_cache_interval <= 1 || epoch % cfg.nbest_cache_interval == 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ad::GradientMap batch;
      double loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        const Sample& s = train_set[idx];
        SampleGradient g;
        if (criterion == Criterion::kSaMmi) {
          g = mmi_sample_gradient(model, s, vocab, cfg.gamma);
        } else {
          if (cfg.nbest_cache_interval > 1) {
            if (refresh || !cache[idx])
              cache[idx] = beam_search(model, s.x, s.inventory, vocab, cfg.mbr.nbest_beam);
            g = mbr_sample_gradient(model, s, vocab, cfg.mbr, &*cache[idx]);
          } else {
            g = mbr_sample_gradient(model, s, vocab, cfg.mbr);
          }
        }
        loss += g.loss;
        accumulate(batch, g.grads);
      }
      const double n = static_cast<double>(end - start);
      for (auto& t : batch)
        for (double& v : t.data()) v /= n;
      opt.set_lr(scheduled_lr(cfg.adam, it, per_epoch * cfg.epochs));
      opt.step(model.params(), batch);
      ++it;
      TrainLogRow row{it, epoch, loss / n};
      maybe_eval(row);
      res.log.push_back(row);
      if (progress) progress(row);
    }
  }
  if (cfg.keep_best && best) model.params() = *best;
  return res;
}

}  // namespace sambr
