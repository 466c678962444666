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

// File formats: dataset JSONL + manifest, checkpoints, N-best JSONL,
// transcript JSONL and metric reports. Doubles are written with the shortest
// round-trip representation, so every numeric field reloads bit-exactly.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sambr/core.hpp"
#include "sambr/decode.hpp"
#include "sambr/error.hpp"
#include "sambr/metrics.hpp"
#include "sambr/model.hpp"
#include "sambr/random.hpp"
#include "sambr/synthdata.hpp"
#include "sambr/experiment.hpp"
#include "sambr/train.hpp"

namespace sambr::io {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kSerPolicy = "unit_pad";
inline constexpr const char* kSpeakerScoring = "segment_argmax_avg";
inline constexpr const char* kSotOrder = "start_time";

// ---------------------------------------------------------------------------
// Plain file helpers.

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

inline std::string to_jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

/// Parse every non-empty line, calling `fn(json, line_no)`. Errors thrown by
/// `fn` are rethrown as ParseError with the offending line number.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& p, Fn&& fn) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string() + " for reading");
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(p.string(), no, e.what());
    }
    try {
      fn(j, no);
    } catch (const ParseError&) {
      throw;
    } catch (const json::exception& e) {
      throw ParseError(p.string(), no, e.what());
    } catch (const Error& e) {
      throw ParseError(p.string(), no, e.what());
    }
  }
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ContractError(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

// ---------------------------------------------------------------------------
// Configs.

inline json to_json(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"num_words", c.num_words},
          {"num_speakers", c.num_speakers},
          {"feature_dim", c.feature_dim},
          {"frames_per_token", c.frames_per_token},
          {"max_speakers", c.max_speakers},
          {"min_tokens", c.min_tokens},
          {"max_tokens", c.max_tokens},
          {"min_offset_frames", c.min_offset_frames},
          {"max_inventory", c.max_inventory},
          {"noise", c.noise},
          {"profile_noise", c.profile_noise},
          {"token_scale", c.token_scale},
          {"speaker_scale", c.speaker_scale},
          {"orthogonal_speakers", c.orthogonal_speakers},
          {"train_size", c.train_size},
          {"dev_size", c.dev_size},
          {"test_size", c.test_size},
          {"max_retries", c.max_retries}};
}

/// Overlay the keys present in `j` onto `c`. Unknown keys are rejected.
inline void merge_into(SynthConfig& c, const json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "num_words") c.num_words = v.get<int>();
    else if (k == "num_speakers") c.num_speakers = v.get<int>();
    else if (k == "feature_dim") c.feature_dim = v.get<int>();
    else if (k == "frames_per_token") c.frames_per_token = v.get<int>();
    else if (k == "max_speakers") c.max_speakers = v.get<int>();
    else if (k == "min_tokens") c.min_tokens = v.get<int>();
    else if (k == "max_tokens") c.max_tokens = v.get<int>();
    else if (k == "min_offset_frames") c.min_offset_frames = v.get<int>();
    else if (k == "max_inventory") c.max_inventory = v.get<int>();
    else if (k == "noise") c.noise = v.get<double>();
    else if (k == "profile_noise") c.profile_noise = v.get<double>();
    else if (k == "token_scale") c.token_scale = v.get<double>();
    else if (k == "speaker_scale") c.speaker_scale = v.get<double>();
    else if (k == "orthogonal_speakers") c.orthogonal_speakers = v.get<bool>();
    else if (k == "train_size") c.train_size = v.get<int>();
    else if (k == "dev_size") c.dev_size = v.get<int>();
    else if (k == "test_size") c.test_size = v.get<int>();
    else if (k == "max_retries") c.max_retries = v.get<int>();
    else throw ConfigError("unknown synth option '" + k + "'");
  }
}

inline json to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim},     {"encoder_dim", c.encoder_dim},
          {"speaker_dim", c.speaker_dim},     {"profile_dim", c.profile_dim},
          {"decoder_dim", c.decoder_dim},     {"query_dim", c.query_dim},
          {"out_dim", c.out_dim},             {"embed_dim", c.embed_dim},
          {"attention_dim", c.attention_dim}, {"vocab_size", c.vocab_size},
          {"gamma", c.gamma},                 {"init_range", c.init_range},
          {"inventory_gain", c.inventory_gain}};
}

inline void merge_into(ModelConfig& c, const json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k == "feature_dim") c.feature_dim = v.get<int>();
    else if (k == "encoder_dim") c.encoder_dim = v.get<int>();
    else if (k == "speaker_dim") c.speaker_dim = v.get<int>();
    else if (k == "profile_dim") c.profile_dim = v.get<int>();
    else if (k == "decoder_dim") c.decoder_dim = v.get<int>();
    else if (k == "query_dim") c.query_dim = v.get<int>();
    else if (k == "out_dim") c.out_dim = v.get<int>();
    else if (k == "embed_dim") c.embed_dim = v.get<int>();
    else if (k == "attention_dim") c.attention_dim = v.get<int>();
    else if (k == "vocab_size") c.vocab_size = v.get<int>();
    else if (k == "gamma") c.gamma = v.get<double>();
    else if (k == "init_range") c.init_range = v.get<double>();
    else if (k == "inventory_gain") c.inventory_gain = v.get<double>();
    else throw ConfigError("unknown model option '" + k + "'");
  }
}

inline json to_json(const BeamConfig& c) {
  return {{"beam_size", c.beam_size},   {"nbest_size", c.nbest_size},
          {"max_steps", c.max_steps},   {"length_norm", c.length_norm},
          {"gamma_decode", c.gamma_decode}};
}

inline void merge_into(BeamConfig& c, const json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k == "beam_size") c.beam_size = v.get<int>();
    else if (k == "nbest_size") c.nbest_size = v.get<int>();
    else if (k == "max_steps") c.max_steps = v.get<int>();
    else if (k == "length_norm") c.length_norm = v.get<bool>();
    else if (k == "gamma_decode") c.gamma_decode = v.get<double>();
    else throw ConfigError("unknown beam option '" + k + "'");
  }
}

inline json to_json(const TrainConfig& c, bool mbr) {
  json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.adam.lr},
            {"lr_final_fraction", c.adam.lr_final_fraction},
            {"clip_norm", c.adam.clip_norm},
            {"eval_every", c.eval_every},
            {"eval_limit", c.eval_limit},
            {"eval_beam", to_json(c.eval_beam)},
            {"keep_best", c.keep_best}};
  if (mbr) {
    j["nbest_beam"] = to_json(c.mbr.nbest_beam);
    j["mmi_weight"] = c.mbr.mmi_weight;
    j["nbest_cache_interval"] = c.nbest_cache_interval;
  } else {
    j["gamma"] = c.gamma;
  }
  return j;
}

inline void merge_into(TrainConfig& c, const json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "lr") c.adam.lr = v.get<double>();
    else if (k == "lr_final_fraction") c.adam.lr_final_fraction = v.get<double>();
    else if (k == "clip_norm") c.adam.clip_norm = v.get<double>();
    else if (k == "eval_every") c.eval_every = v.get<int>();
    else if (k == "eval_limit") c.eval_limit = v.get<int>();
    else if (k == "eval_beam") merge_into(c.eval_beam, v);
    else if (k == "keep_best") c.keep_best = v.get<bool>();
    else if (k == "gamma") c.gamma = v.get<double>();
    else if (k == "nbest_beam") merge_into(c.mbr.nbest_beam, v);
    else if (k == "mmi_weight") c.mbr.mmi_weight = v.get<double>();
    else if (k == "nbest_cache_interval") c.nbest_cache_interval = v.get<int>();
    else throw ConfigError("unknown training option '" + k + "'");
  }
}

inline json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},
          {"threads", c.threads},
          {"synth", to_json(c.synth)},
          {"model", to_json(c.model)},
          {"train_mmi", to_json(c.mmi, false)},
          {"train_mbr", to_json(c.mbr, true)},
          {"decode", to_json(c.decode)}};
}

inline void merge_into(ExperimentConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "threads") c.threads = v.get<int>();
    else if (k == "synth") merge_into(c.synth, v);
    else if (k == "model") merge_into(c.model, v);
    else if (k == "train_mmi") merge_into(c.mmi, v);
    else if (k == "train_mbr") merge_into(c.mbr, v);
    else if (k == "decode") merge_into(c.decode, v);
    else throw ConfigError("unknown config section '" + k + "'");
  }
}

inline json parse_json_file(const std::filesystem::path& p) {
  const std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> 1-based line
    long line = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(p.string(), line, e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset.

inline json to_json(const Sample& s) {
  json inv = json::array();
  for (const auto& p : s.inventory.profiles())
    inv.push_back({{"speaker_id", p.speaker_id()}, {"vector", p.vector()}});
  return {{"id", s.id},
          {"shape", {s.x.num_frames(), s.x.dim()}},
          {"frames", s.x.data()},
          {"tokens", s.ref.tokens},
          {"speakers", s.ref.speakers},
          {"inventory", std::move(inv)},
          {"true_count", s.true_count},
          {"seed", s.meta.seed},
          {"offsets", s.meta.offsets},
          {"lengths", s.meta.lengths},
          {"energy", s.meta.energy}};
}

/// Rebuild a Sample. Profiles are stored unit-norm and taken back verbatim.
inline Sample sample_from_json(const json& j, const Vocabulary& vocab) {
  Sample s;
  s.id = require<std::string>(j, "id");
  const auto shape = require<std::vector<std::size_t>>(j, "shape");
  if (shape.size() != 2) throw DimensionError("shape must have two entries");
  s.x = FeatureSequence(shape[0], shape[1], require<std::vector<double>>(j, "frames"));
  s.ref.tokens = require<TokenSeq>(j, "tokens");
  s.ref.speakers = require<std::vector<SpeakerId>>(j, "speakers");
  std::vector<SpeakerProfile> profiles;
  for (const auto& p : require<json>(j, "inventory")) {
    profiles.push_back(SpeakerProfile::from_normalized(
        require<SpeakerId>(p, "speaker_id"), require<std::vector<double>>(p, "vector")));
  }
  s.inventory = SpeakerInventory(std::move(profiles));
  s.true_count = require<int>(j, "true_count");
  if (j.contains("seed")) s.meta.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("offsets")) s.meta.offsets = j.at("offsets").get<std::vector<int>>();
  if (j.contains("lengths")) s.meta.lengths = j.at("lengths").get<std::vector<int>>();
  if (j.contains("energy")) s.meta.energy = j.at("energy").get<std::vector<double>>();
  auto bad = validate_reference(s.ref, vocab, s.inventory);
  if (!bad.empty())
    throw ContractError(std::string("invalid reference: ") + to_string(bad.front().kind) +
                        " " + bad.front().detail);
  if (s.true_count != reference_speaker_count(s.ref))
    throw ContractError("true_count disagrees with the reference");
  return s;
}

inline std::string samples_to_jsonl(const std::vector<Sample>& v) {
  std::vector<json> rows;
  rows.reserve(v.size());
  for (const auto& s : v) rows.push_back(to_json(s));
  return to_jsonl(rows);
}

inline std::vector<Sample> load_samples(const std::filesystem::path& p,
                                        const Vocabulary& vocab) {
  std::vector<Sample> out;
  for_each_jsonl(p, [&](const json& j, long) { out.push_back(sample_from_json(j, vocab)); });
  return out;
}

/// Writes train/dev/test JSONL and manifest.json into `dir`.
inline json write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  json manifest;
  manifest["format"] = "sambr-dataset";
  manifest["version"] = 1;
  manifest["config"] = to_json(d.config);
  manifest["vocab"] = d.vocab.tokens();
  manifest["sot_order"] = kSotOrder;
  std::uint64_t h = fnv1a(manifest["config"].dump());
  json splits = json::object();
  auto put = [&](const char* name, const std::vector<Sample>& v) {
    const std::string text = samples_to_jsonl(v);
    write_file(dir / (std::string(name) + ".jsonl"), text);
    h = fnv1a(text, h);
    std::map<std::string, long> by_count;
    for (const auto& s : v) by_count[std::to_string(s.true_count)] += 1;
    splits[name] = {{"file", std::string(name) + ".jsonl"},
                    {"count", v.size()},
                    {"speaker_counts", by_count}};
  };
  put("train", d.train);
  put("dev", d.dev);
  put("test", d.test);
  manifest["splits"] = std::move(splits);
  manifest["content_hash"] = hex64(h);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

inline Vocabulary vocab_from_json(const json& tokens) {
  auto t = tokens.get<std::vector<std::string>>();
  if (t.size() < 3) throw ContractError("vocabulary too small");
  const auto n = static_cast<TokenId>(t.size());
  return Vocabulary(std::move(t), n - 2, n - 1);
}

/// Load a dataset directory written by write_dataset.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  const json m = parse_json_file(mpath);
  Dataset d;
  merge_into(d.config, require<json>(m, "config"));
  d.vocab = vocab_from_json(require<json>(m, "vocab"));
  const auto& splits = require<json>(m, "splits");
  auto load = [&](const char* name) {
    return load_samples(dir / require<std::string>(splits.at(name), "file"), d.vocab);
  };
  d.train = load("train");
  d.dev = load("dev");
  d.test = load("test");
  return d;
}

// ---------------------------------------------------------------------------
// Checkpoints.

inline json checkpoint_json(const Model& m, const Vocabulary& vocab,
                            const json& extra = json::object()) {
  json params = json::array();
  const auto& ps = m.params();
  for (int s = 0; s < ps.size(); ++s) {
    const auto& t = ps[s];
    params.push_back({{"name", ps.name(s)},
                      {"shape", {t.rows(), t.cols()}},
                      {"data", t.storage()}});
  }
  return {{"format", "sambr-checkpoint"},
          {"version", kCheckpointVersion},
          {"model_config", to_json(m.config())},
          {"vocab", vocab.tokens()},
          {"meta", extra},
          {"params", std::move(params)}};
}

inline void save_checkpoint(const std::filesystem::path& p, const Model& m,
                            const Vocabulary& vocab, const json& extra = json::object()) {
  write_file(p, checkpoint_json(m, vocab, extra).dump() + "\n");
}

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  json meta;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  if (require<std::string>(j, "format") != "sambr-checkpoint")
    throw ContractError("not a checkpoint");
  if (require<int>(j, "version") != kCheckpointVersion)
    throw ContractError("unsupported checkpoint version");
  ModelConfig cfg;
  merge_into(cfg, require<json>(j, "model_config"));
  ParamSet ps;
  for (const auto& p : require<json>(j, "params")) {
    const auto shape = require<std::vector<std::size_t>>(p, "shape");
    if (shape.size() != 2) throw DimensionError("tensor shape must have two entries");
    ps.add(require<std::string>(p, "name"),
           ad::Tensor({shape[0], shape[1]}, require<std::vector<double>>(p, "data")));
  }
  return {Model(cfg, std::move(ps)), vocab_from_json(require<json>(j, "vocab")),
          j.value("meta", json::object())};
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
  const json j = parse_json_file(p);
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(p.string(), 1, e.what());
  }
}

// ---------------------------------------------------------------------------
// N-best lists.

inline std::vector<json> nbest_to_json(const NBestList& nb, const SpeakerInventory& inv,
                                       bool with_betas = true) {
  std::vector<json> rows;
  for (std::size_t r = 0; r < nb.entries.size(); ++r) {
    const auto& e = nb.entries[r];
    std::vector<SpeakerId> ids;
    for (std::size_t k : e.hyp.segment_speakers) ids.push_back(inv[k].speaker_id());
    json row = {{"ref_id", nb.ref_id},
                {"rank", r},
                {"tokens", e.hyp.tokens},
                {"speakers_per_segment", ids},
                {"segment_speaker_index", e.hyp.segment_speakers},
                {"token_logprobs", e.hyp.token_logprobs},
                {"log_joint", e.hyp.log_joint},
                {"norm_score", e.norm_score},
                {"truncated", e.hyp.truncated}};
    if (with_betas) row["betas"] = e.hyp.betas;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Transcript implied by a segmented token sequence and one speaker id per
/// segment (same-speaker segments merged).
inline AttributedTranscript transcript_from_segments(const TokenSeq& tokens,
                                                     const std::vector<SpeakerId>& ids,
                                                     const Vocabulary& vocab) {
  auto segs = segment_by_sc(tokens, vocab);
  if (segs.size() != ids.size())
    throw ContractError("speakers_per_segment does not match the segment count");
  std::vector<Utterance> utts;
  for (std::size_t i = 0; i < segs.size(); ++i) utts.push_back({ids[i], segs[i]});
  return merge_utterances(utts);
}

inline NBestEntry nbest_entry_from_json(const json& j, const Vocabulary& vocab) {
  NBestEntry e;
  e.hyp.tokens = require<TokenSeq>(j, "tokens");
  e.hyp.segment_speakers = require<std::vector<std::size_t>>(j, "segment_speaker_index");
  e.hyp.token_logprobs = j.value("token_logprobs", std::vector<double>{});
  if (j.contains("betas")) e.hyp.betas = j.at("betas").get<std::vector<std::vector<double>>>();
  e.hyp.log_joint = require<double>(j, "log_joint");
  e.hyp.finished = true;
  e.hyp.truncated = j.value("truncated", false);
  e.norm_score = require<double>(j, "norm_score");
  e.transcript = transcript_from_segments(
      e.hyp.tokens, require<std::vector<SpeakerId>>(j, "speakers_per_segment"), vocab);
  return e;
}

/// Groups consecutive lines by ref_id, preserving file order.
inline std::vector<NBestList> load_nbest(const std::filesystem::path& p,
                                         const Vocabulary& vocab) {
  std::vector<NBestList> out;
  for_each_jsonl(p, [&](const json& j, long) {
    const auto id = require<std::string>(j, "ref_id");
    if (out.empty() || out.back().ref_id != id) out.push_back({id, {}});
    if (require<std::size_t>(j, "rank") != out.back().entries.size())
      throw ContractError("ranks must be consecutive from 0");
    out.back().entries.push_back(nbest_entry_from_json(j, vocab));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Transcripts and reports.

inline json to_json(const std::string& id, const AttributedTranscript& t) {
  json utts = json::array();
  for (const auto& u : t.utterances) utts.push_back({{"speaker", u.speaker}, {"tokens", u.tokens}});
  return {{"id", id}, {"utterances", std::move(utts)}};
}

inline AttributedTranscript transcript_from_json(const json& j) {
  AttributedTranscript t;
  for (const auto& u : require<json>(j, "utterances"))
    t.utterances.push_back({require<SpeakerId>(u, "speaker"), require<TokenSeq>(u, "tokens")});
  return t;
}

struct TranscriptRecord {
  std::string id;
  AttributedTranscript transcript;
  int true_count = 0;  // 0 when not recorded
};

inline std::vector<TranscriptRecord> load_transcripts(const std::filesystem::path& p) {
  std::vector<TranscriptRecord> out;
  for_each_jsonl(p, [&](const json& j, long) {
    out.push_back({require<std::string>(j, "id"), transcript_from_json(j),
                   j.value("true_count", 0)});
  });
  return out;
}

inline json to_json(const EditStats& s) {
  return {{"substitutions", s.substitutions},
          {"insertions", s.insertions},
          {"deletions", s.deletions}};
}

inline json to_json(const MetricReport& r) {
  json j = {{"num_samples", r.num_samples},
            {"ser_policy", kSerPolicy},
            {"speaker_scoring", kSpeakerScoring},
            {"ser",
             {{"misattributions", r.ser.misattributions},
              {"insertions", r.ser.insertions},
              {"deletions", r.ser.deletions},
              {"ref_utterances", r.ser.ref_utterances}}},
            {"wer", {{"counts", to_json(r.wer.stats)}, {"ref_words", r.wer.ref_words}}},
            {"sa_wer", {{"counts", to_json(r.sa_wer.stats)}, {"ref_words", r.sa_wer.ref_words}}}};
  if (r.ser.ref_utterances > 0) j["ser"]["rate"] = r.ser_rate();
  if (r.wer.ref_words > 0) j["wer"]["rate"] = r.wer_rate();
  if (r.sa_wer.ref_words > 0) j["sa_wer"]["rate"] = r.sa_wer_rate();
  return j;
}

inline json to_json(const EvalResult& ev) {
  json j = to_json(ev.total);
  json by = json::object();
  for (const auto& [c, r] : ev.by_count) by[std::to_string(c)] = to_json(r);
  j["by_speaker_count"] = std::move(by);
  return j;
}

}  // namespace sambr::io
