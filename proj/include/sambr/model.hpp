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

// Toy-scale end-to-end speaker-attributed ASR network.
//
// ASR block:      H_enc = AsrEncoder(X)            (bidirectional GRU)
//                 u_n = DecoderRNN(y_{n-1}, c_{n-1}, u_{n-1})
//                 c_n, a_n = Attention(u_n, a_{n-1}, H_enc)
//                 o_n = DecoderOut(c_n, u_n, dbar_n)
// Speaker block:  H_spk = SpeakerEncoder(X)        (projection + GRU)
//                 p_n = a_n . H_spk                (same a_n as c_n)
//                 q_n = SpeakerQueryRNN(p_n, y_{n-1}, q_{n-1})
//                 b_n = InventoryAttention(q_n, D)
//                 dbar_n = b_n . D
//
// All computation happens on an ad::Tape through a Binder, which maps
// parameter slots to tape leaves once per tape.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sambr/autodiff.hpp"
#include "sambr/core.hpp"

namespace sambr {

struct ModelConfig {
  int feature_dim = 32;    // F
  int encoder_dim = 32;    // E, split evenly between the two directions
  int speaker_dim = 32;    // P, SpeakerEncoder output
  int profile_dim = 32;    // d-vector dimension
  int decoder_dim = 32;    // U, DecoderRNN state
  int query_dim = 32;      // SpeakerQueryRNN state
  int out_dim = 32;        // DecoderOut recurrent layer
  int embed_dim = 16;
  int attention_dim = 24;
  int vocab_size = 22;     // V, including <sc> and <eos>
  double gamma = 0.1;      // speaker-probability scale for SA-MMI
  double init_range = 0.1;
  double inventory_gain = 16.0;  // multiplier on the 1/sqrt(Dp) score scale

  void validate() const {
    for (int d : {feature_dim, encoder_dim, speaker_dim, profile_dim,
                  decoder_dim, query_dim, out_dim, embed_dim, attention_dim,
                  vocab_size})
      if (d <= 0) throw ConfigError("model dimensions must be positive");
    if (encoder_dim % 2 != 0) throw ConfigError("encoder_dim must be even");
    if (vocab_size < 3) throw ConfigError("vocab_size must be >= 3");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
    if (!(inventory_gain > 0.0)) throw ConfigError("inventory_gain must be positive");
  }
};

/// Named parameter tensors, addressed by slot.
class ParamSet {
 public:
  int add(std::string name, ad::Tensor value) {
    if (index_.count(name)) throw ContractError("duplicate parameter " + name);
    index_[name] = static_cast<int>(values_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return static_cast<int>(values_.size() - 1);
  }
  int size() const { return static_cast<int>(values_.size()); }
  ad::Tensor& operator[](int slot) { return values_.at(static_cast<std::size_t>(slot)); }
  const ad::Tensor& operator[](int slot) const {
    return values_.at(static_cast<std::size_t>(slot));
  }
  const std::string& name(int slot) const { return names_.at(static_cast<std::size_t>(slot)); }
  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }
  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
  std::unordered_map<std::string, int> index_;
};

struct GruSlots {
  int w_in = -1;   // in x 3H
  int w_rec = -1;  // H x 3H
  int bias = -1;   // 1 x 3H
  int hidden = 0;
};

/// Decoder recurrent carries between steps.
struct DecoderState {
  ad::Var u;      // 1 x U
  ad::Var q;      // 1 x Q
  ad::Var g;      // 1 x O
  ad::Var c;      // 1 x E
  ad::Var alpha;  // T x 1
  int step = 0;
};

struct DecoderStepOutput {
  ad::Var log_token_dist;    // 1 x V, log o_n
  ad::Var log_speaker_dist;  // 1 x K, log b_n
  ad::Var speaker_dist;      // 1 x K, b_n
  ad::Var attention;         // T x 1, a_n
  ad::Var speaker_vector;    // 1 x P, p_n
  ad::Var context;           // 1 x E, c_n
  ad::Var weighted_profile;  // 1 x profile_dim
  DecoderState next_state;
};

class Model;

/// Per-tape parameter leaves.
class Binder {
 public:
  Binder(const Model& model, ad::Tape& tape);
  ad::Var operator()(int slot);
  ad::Tape& tape() { return tape_; }
  const Model& model() const { return model_; }

 private:
  const Model& model_;
  ad::Tape& tape_;
  std::vector<ad::Var> cache_;
};

/// Encoded input plus the bound speaker inventory for one utterance.
struct EncodedInput {
  ad::Var h_enc;     // T x E
  ad::Var h_spk;     // T x P
  ad::Var enc_proj;  // T x A, W_h H_enc + b
  std::size_t num_frames = 0;
  // Profiles are kept in ascending speaker-id order so that the inventory
  // attention is bit-identical under any permutation of D; `canonical[k]` is
  // the sorted position of inventory entry k.
  ad::Var profiles;    // K x Dp (sorted)
  ad::Var profiles_t;  // Dp x K (sorted)
  std::vector<std::size_t> canonical;
  bool identity_order = true;
  std::size_t num_profiles = 0;
};

class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& cfg, std::uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    build();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-cfg_.init_range, cfg_.init_range);
    for (int s = 0; s < params_.size(); ++s)
      for (double& x : params_[s].data()) x = dist(rng);
  }

  /// Wrap existing parameters (e.g. from a checkpoint). Names and shapes must
  /// match the architecture implied by `cfg`.
  Model(const ModelConfig& cfg, ParamSet params) : cfg_(cfg) {
    cfg_.validate();
    build();
    if (params.size() != params_.size())
      throw ConfigError("parameter count mismatch");
    for (int s = 0; s < params_.size(); ++s) {
      const int other = params.find(params_.name(s));
      if (other < 0) throw ConfigError("missing parameter " + params_.name(s));
      if (!(params[other].shape() == params_[s].shape()))
        throw ConfigError("shape mismatch for " + params_.name(s));
      params_[s] = params[other];
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Frame-synchronous encodings (H_enc, H_spk) and the inventory matrices.
  EncodedInput encode(Binder& b, const FeatureSequence& x,
                      const SpeakerInventory& inv) const {
    if (static_cast<int>(x.dim()) != cfg_.feature_dim)
      throw ConfigError("feature dim " + std::to_string(x.dim()) +
                        " != model F " + std::to_string(cfg_.feature_dim));
    if (inv.size() < 1) throw ContractError("empty inventory");
    if (static_cast<int>(inv.dim()) != cfg_.profile_dim)
      throw ConfigError("profile dim " + std::to_string(inv.dim()) +
                        " != model profile_dim " + std::to_string(cfg_.profile_dim));
    ad::Tape& t = b.tape();
    const std::size_t T = x.num_frames();
    EncodedInput e;
    e.num_frames = T;
    ad::Var X = t.constant(ad::Tensor({T, x.dim()}, x.data()));

    std::vector<ad::Var> fwd = run_gru(b, enc_fwd_, X, false);
    std::vector<ad::Var> bwd = run_gru(b, enc_bwd_, X, true);
    e.h_enc = ad::concat({ad::concat(fwd, 0), ad::concat(bwd, 0)}, 1);

    ad::Var z = ad::tanh(ad::add(ad::matmul(X, b(spk_proj_w_)),
                                 ad::tile_rows(b(spk_proj_b_), T)));
    e.h_spk = ad::concat(run_gru(b, spk_rnn_, z, false), 0);

    e.enc_proj = ad::add(ad::matmul(e.h_enc, b(att_enc_w_)),
                         ad::tile_rows(b(att_b_), T));

    const std::size_t K = inv.size(), Dp = inv.dim();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      return inv[i].speaker_id() < inv[j].speaker_id();
    });
    e.canonical.assign(K, 0);
    ad::Tensor P({K, Dp}), Pt({Dp, K});
    for (std::size_t pos = 0; pos < K; ++pos) {
      const std::size_t k = order[pos];
      e.canonical[k] = pos;
      if (k != pos) e.identity_order = false;
      for (std::size_t d = 0; d < Dp; ++d) {
        P(pos, d) = inv[k].vector()[d];
        Pt(d, pos) = inv[k].vector()[d];
      }
    }
    e.profiles = t.constant(std::move(P));
    e.profiles_t = t.constant(std::move(Pt));
    e.num_profiles = K;
    return e;
  }

  DecoderState initial_state(Binder& b, const EncodedInput& e) const {
    ad::Tape& t = b.tape();
    DecoderState s;
    s.u = t.constant(ad::Tensor({1, static_cast<std::size_t>(cfg_.decoder_dim)}));
    s.q = t.constant(ad::Tensor({1, static_cast<std::size_t>(cfg_.query_dim)}));
    s.g = t.constant(ad::Tensor({1, static_cast<std::size_t>(cfg_.out_dim)}));
    s.c = t.constant(ad::Tensor({1, static_cast<std::size_t>(cfg_.encoder_dim)}));
    s.alpha = t.constant(ad::Tensor({e.num_frames, 1}));
    return s;
  }

  /// Token used as y_0.
  static TokenId start_token(const Vocabulary& vocab) { return vocab.eos_id(); }

  DecoderStepOutput step(Binder& b, const EncodedInput& e,
                         const DecoderState& s, TokenId prev) const {
    if (prev < 0 || prev >= cfg_.vocab_size)
      throw ContractError("token id out of range");
    const std::size_t T = e.num_frames;
    DecoderStepOutput out;
    ad::Var emb = ad::slice(b(embed_), 0, static_cast<std::size_t>(prev),
                            static_cast<std::size_t>(prev) + 1);

    // DecoderRNN(y_{n-1}, c_{n-1}, u_{n-1})
    ad::Var u = gru_step(b, dec_rnn_, ad::concat({emb, s.c}, 1), s.u);

    // Location-aware additive attention over H_enc.
    ad::Var pre = ad::add(
        ad::add(e.enc_proj, ad::tile_rows(ad::matmul(u, b(att_dec_w_)), T)),
        ad::matmul(s.alpha, b(att_loc_w_)));
    ad::Var alpha =
        ad::softmax(ad::matmul(ad::tanh(pre), b(att_v_)), 0);  // T x 1
    ad::Var alpha_row = ad::reshape(alpha, {1, T});
    ad::Var c = ad::matmul(alpha_row, e.h_enc);
    ad::Var p = ad::matmul(alpha_row, e.h_spk);

    // SpeakerQueryRNN(p_n, y_{n-1}, q_{n-1}) and InventoryAttention(q_n, D).
    ad::Var q = gru_step(b, spk_query_, ad::concat({p, emb}, 1), s.q);
    ad::Var key = ad::matmul(q, b(inv_key_w_));
    ad::Var scores = ad::scale(ad::matmul(key, e.profiles_t),
                               cfg_.inventory_gain /
                                   std::sqrt(static_cast<double>(cfg_.profile_dim)));
    ad::Var beta_sorted = ad::softmax(scores, 1);
    ad::Var log_beta_sorted = ad::log_softmax(scores, 1);
    ad::Var dbar = ad::matmul(beta_sorted, e.profiles);

    // DecoderOut(c_n, u_n, dbar_n)
    ad::Var g = gru_step(b, dec_out_, ad::concat({c, u, dbar}, 1), s.g);
    ad::Var logits = ad::add(ad::matmul(g, b(out_w_)), b(out_b_));

    out.log_token_dist = ad::log_softmax(logits, 1);
    out.speaker_dist = to_inventory_order(e, beta_sorted);
    out.log_speaker_dist = to_inventory_order(e, log_beta_sorted);
    out.attention = alpha;
    out.speaker_vector = p;
    out.context = c;
    out.weighted_profile = dbar;
    out.next_state = {u, q, g, c, alpha, s.step + 1};
    return out;
  }

 private:
  GruSlots add_gru(const std::string& name, int in, int hidden) {
    const auto H3 = static_cast<std::size_t>(3 * hidden);
    GruSlots g;
    g.hidden = hidden;
    g.w_in = params_.add(name + ".w_in", ad::Tensor({static_cast<std::size_t>(in), H3}));
    g.w_rec = params_.add(name + ".w_rec",
                          ad::Tensor({static_cast<std::size_t>(hidden), H3}));
    g.bias = params_.add(name + ".bias", ad::Tensor({1, H3}));
    return g;
  }

  int add_matrix(const std::string& name, int r, int c) {
    return params_.add(name, ad::Tensor({static_cast<std::size_t>(r),
                                         static_cast<std::size_t>(c)}));
  }

  void build() {
    const int F = cfg_.feature_dim, E = cfg_.encoder_dim, P = cfg_.speaker_dim;
    const int Dp = cfg_.profile_dim, U = cfg_.decoder_dim, Q = cfg_.query_dim;
    const int O = cfg_.out_dim, Em = cfg_.embed_dim, A = cfg_.attention_dim;
    const int V = cfg_.vocab_size;
    embed_ = add_matrix("embed", V, Em);
    enc_fwd_ = add_gru("asr_encoder.fwd", F, E / 2);
    enc_bwd_ = add_gru("asr_encoder.bwd", F, E / 2);
    spk_proj_w_ = add_matrix("speaker_encoder.proj_w", F, P);
    spk_proj_b_ = add_matrix("speaker_encoder.proj_b", 1, P);
    spk_rnn_ = add_gru("speaker_encoder.rnn", P, P);
    dec_rnn_ = add_gru("decoder_rnn", Em + E, U);
    att_enc_w_ = add_matrix("attention.enc_w", E, A);
    att_dec_w_ = add_matrix("attention.dec_w", U, A);
    att_loc_w_ = add_matrix("attention.loc_w", 1, A);
    att_b_ = add_matrix("attention.bias", 1, A);
    att_v_ = add_matrix("attention.v", A, 1);
    spk_query_ = add_gru("speaker_query_rnn", P + Em, Q);
    inv_key_w_ = add_matrix("inventory_attention.key_w", Q, Dp);
    dec_out_ = add_gru("decoder_out.rnn", E + U + Dp, O);
    out_w_ = add_matrix("decoder_out.w", O, V);
    out_b_ = add_matrix("decoder_out.b", 1, V);
  }

  // h' = (1 - z) * n + z * h with r, z gates and candidate n.
  static ad::Var gru_from_proj(Binder& b, const GruSlots& w, ad::Var xw,
                               ad::Var h) {
    const auto H = static_cast<std::size_t>(w.hidden);
    ad::Var hw = ad::matmul(h, b(w.w_rec));
    ad::Var r = ad::sigmoid(ad::add(ad::slice(xw, 1, 0, H), ad::slice(hw, 1, 0, H)));
    ad::Var z = ad::sigmoid(
        ad::add(ad::slice(xw, 1, H, 2 * H), ad::slice(hw, 1, H, 2 * H)));
    ad::Var n = ad::tanh(ad::add(ad::slice(xw, 1, 2 * H, 3 * H),
                                 ad::mul(r, ad::slice(hw, 1, 2 * H, 3 * H))));
    return ad::add(n, ad::mul(z, ad::sub(h, n)));
  }

  static ad::Var gru_step(Binder& b, const GruSlots& w, ad::Var x, ad::Var h) {
    return gru_from_proj(b, w, ad::add(ad::matmul(x, b(w.w_in)), b(w.bias)), h);
  }

  std::vector<ad::Var> run_gru(Binder& b, const GruSlots& w, ad::Var x,
                               bool reverse) const {
    const std::size_t T = x.shape().rows;
    ad::Var xw = ad::add(ad::matmul(x, b(w.w_in)), ad::tile_rows(b(w.bias), T));
    ad::Var h = b.tape().constant(ad::Tensor({1, static_cast<std::size_t>(w.hidden)}));
    std::vector<ad::Var> out(T);
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t t = reverse ? T - 1 - i : i;
      h = gru_from_proj(b, w, ad::slice(xw, 0, t, t + 1), h);
      out[t] = h;
    }
    return out;
  }

  static ad::Var to_inventory_order(const EncodedInput& e, ad::Var sorted) {
    if (e.identity_order) return sorted;
    std::vector<ad::Var> cols;
    cols.reserve(e.num_profiles);
    for (std::size_t k = 0; k < e.num_profiles; ++k)
      cols.push_back(ad::slice(sorted, 1, e.canonical[k], e.canonical[k] + 1));
    return ad::concat(cols, 1);
  }

  ModelConfig cfg_;
  ParamSet params_;
  int embed_ = -1;
  GruSlots enc_fwd_, enc_bwd_, spk_rnn_, dec_rnn_, spk_query_, dec_out_;
  int spk_proj_w_ = -1, spk_proj_b_ = -1;
  int att_enc_w_ = -1, att_dec_w_ = -1, att_loc_w_ = -1, att_b_ = -1, att_v_ = -1;
  int inv_key_w_ = -1, out_w_ = -1, out_b_ = -1;
};

inline Binder::Binder(const Model& model, ad::Tape& tape)
    : model_(model), tape_(tape), cache_(static_cast<std::size_t>(model.params().size())) {}

inline ad::Var Binder::operator()(int slot) {
  auto& v = cache_.at(static_cast<std::size_t>(slot));
  if (!v.valid()) v = tape_.param(model_.params()[slot], slot);
  return v;
}

/// Teacher-forced pass over a token sequence with per-token speaker indices
/// (inventory positions). The total is
///   sum_n log o_{n,y_n} + gamma * sum_n log b_{n,s_n}.
struct TeacherForcedScore {
  ad::Var total;
  ad::Var token_part;
  ad::Var speaker_part;
  std::vector<ad::Var> log_token_dists;
  std::vector<ad::Var> log_speaker_dists;
  std::vector<DecoderStepOutput> steps;
};

inline TeacherForcedScore teacher_forced_score(
    const Model& model, Binder& b, const EncodedInput& e,
    std::span<const TokenId> tokens, std::span<const std::size_t> speaker_index,
    const Vocabulary& vocab, double gamma) {
  if (tokens.size() != speaker_index.size())
    throw DimensionError("token and speaker sequences differ in length");
  if (tokens.empty()) throw ContractError("empty token sequence");
  TeacherForcedScore out;
  DecoderState s = model.initial_state(b, e);
  TokenId prev = Model::start_token(vocab);
  std::vector<ad::Var> tok_terms, spk_terms;
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    if (speaker_index[n] >= e.num_profiles)
      throw MissingProfileError("speaker index out of inventory range");
    DecoderStepOutput st = model.step(b, e, s, prev);
    tok_terms.push_back(ad::pick(st.log_token_dist, 0, static_cast<std::size_t>(tokens[n])));
    spk_terms.push_back(ad::pick(st.log_speaker_dist, 0, speaker_index[n]));
    out.log_token_dists.push_back(st.log_token_dist);
    out.log_speaker_dists.push_back(st.log_speaker_dist);
    s = st.next_state;
    prev = tokens[n];
    out.steps.push_back(std::move(st));
  }
  out.token_part = ad::reduce_sum(ad::concat(tok_terms, 1));
  out.speaker_part = ad::reduce_sum(ad::concat(spk_terms, 1));
  out.total = ad::add(out.token_part, ad::scale(out.speaker_part, gamma));
  return out;
}

/// Inventory positions for a reference's speaker labels.
inline std::vector<std::size_t> speaker_indices(std::span<const SpeakerId> speakers,
                                                const SpeakerInventory& inv) {
  std::vector<std::size_t> out;
  out.reserve(speakers.size());
  for (SpeakerId s : speakers) {
    auto k = inv.index_of(s);
    if (!k) throw MissingProfileError("speaker " + std::to_string(s) +
                                      " has no profile in the inventory");
    out.push_back(*k);
  }
  return out;
}

/// log P(Y,S|X,D) of a reference, teacher-forced on both tokens and speakers.
inline ad::Var joint_log_prob(const Model& model, Binder& b,
                              const SerializedReference& ref,
                              const FeatureSequence& x,
                              const SpeakerInventory& inv,
                              const Vocabulary& vocab, double gamma) {
  const auto idx = speaker_indices(ref.speakers, inv);
  EncodedInput e = model.encode(b, x, inv);
  return teacher_forced_score(model, b, e, ref.tokens, idx, vocab, gamma).total;
}

}  // namespace sambr
