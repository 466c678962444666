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

// Domain types shared by the whole library: the token vocabulary with its
// speaker-change and end-of-sequence symbols, acoustic feature sequences,
// speaker inventories, serialized multi-talker references and the
// speaker-attributed transcripts that decoding and scoring exchange.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sambr/error.hpp"

namespace sambr {

using TokenId = int;
using SpeakerId = int;
using TokenSeq = std::vector<TokenId>;

class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> tokens, TokenId sc_id, TokenId eos_id)
      : tokens_(std::move(tokens)), sc_id_(sc_id), eos_id_(eos_id) {
    if (tokens_.size() < 3)
      throw ContractError("vocabulary needs at least 3 tokens");
    if (sc_id_ == eos_id_) throw ContractError("<sc> and <eos> must differ");
    if (!contains(sc_id_) || !contains(eos_id_))
      throw ContractError("special symbol index out of range");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw ContractError("duplicate token '" + tokens_[i] + "'");
    }
  }

  /// `num_words` ordinary tokens w00, w01, ... followed by <sc> and <eos>.
  static Vocabulary with_words(int num_words) {
    if (num_words < 1) throw ContractError("need at least one word token");
    std::vector<std::string> t;
    for (int i = 0; i < num_words; ++i) {
      std::string s = std::to_string(i);
      if (s.size() < 2) s = "0" + s;
      t.push_back("w" + s);
    }
    t.push_back("<sc>");
    t.push_back("<eos>");
    return Vocabulary(std::move(t), num_words, num_words + 1);
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  TokenId sc_id() const { return sc_id_; }
  TokenId eos_id() const { return eos_id_; }
  bool contains(TokenId id) const { return id >= 0 && id < size(); }
  bool is_special(TokenId id) const { return id == sc_id_ || id == eos_id_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<TokenId> id(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  TokenId sc_id_ = -1;
  TokenId eos_id_ = -1;
  std::unordered_map<std::string, TokenId> index_;
};

/// T x F row-major frame matrix.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::size_t num_frames, std::size_t dim,
                  std::vector<double> data)
      : num_frames_(num_frames), dim_(dim), data_(std::move(data)) {
    if (num_frames_ < 1) throw ContractError("feature sequence needs T >= 1");
    if (data_.size() != num_frames_ * dim_)
      throw DimensionError("feature data length != T*F");
    for (double v : data_)
      if (!std::isfinite(v)) throw NumericError("non-finite feature value");
  }

  std::size_t num_frames() const { return num_frames_; }
  std::size_t dim() const { return dim_; }
  const std::vector<double>& data() const { return data_; }
  std::span<const double> frame(std::size_t t) const {
    return {data_.data() + t * dim_, dim_};
  }

  friend bool operator==(const FeatureSequence&,
                         const FeatureSequence&) = default;

 private:
  std::size_t num_frames_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// A speaker's enrolment vector. Stored unit-normalized.
class SpeakerProfile {
 public:
  SpeakerProfile() = default;
  SpeakerProfile(SpeakerId speaker_id, std::vector<double> vec)
      : speaker_id_(speaker_id), vector_(std::move(vec)) {
    double norm = 0.0;
    for (double v : vector_) {
      if (!std::isfinite(v)) throw NumericError("non-finite profile entry");
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (vector_.empty() || norm == 0.0)
      throw ContractError("profile vector must be non-empty and non-zero");
    for (double& v : vector_) v /= norm;
  }

  /// Adopt a vector that is already unit-norm without rescaling it, so that
  /// stored profiles reload bit-exactly.
  static SpeakerProfile from_normalized(SpeakerId speaker_id, std::vector<double> vec) {
    SpeakerProfile p(speaker_id, vec);
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-9)
      throw ContractError("profile vector is not unit-norm");
    p.vector_ = std::move(vec);
    return p;
  }

  SpeakerId speaker_id() const { return speaker_id_; }
  const std::vector<double>& vector() const { return vector_; }
  std::size_t dim() const { return vector_.size(); }

  friend bool operator==(const SpeakerProfile&,
                         const SpeakerProfile&) = default;

 private:
  SpeakerId speaker_id_ = -1;
  std::vector<double> vector_;
};

class SpeakerInventory {
 public:
  SpeakerInventory() = default;
  explicit SpeakerInventory(std::vector<SpeakerProfile> profiles)
      : profiles_(std::move(profiles)) {
    if (profiles_.empty()) throw ContractError("inventory needs K >= 1");
    std::set<SpeakerId> seen;
    for (const auto& p : profiles_) {
      if (!seen.insert(p.speaker_id()).second)
        throw ContractError("duplicate speaker id " +
                            std::to_string(p.speaker_id()) + " in inventory");
      if (p.dim() != profiles_.front().dim())
        throw DimensionError("inventory profiles differ in dimension");
    }
  }

  std::size_t size() const { return profiles_.size(); }
  std::size_t dim() const { return profiles_.empty() ? 0 : profiles_[0].dim(); }
  const SpeakerProfile& operator[](std::size_t k) const { return profiles_[k]; }
  const std::vector<SpeakerProfile>& profiles() const { return profiles_; }

  std::optional<std::size_t> index_of(SpeakerId id) const {
    for (std::size_t k = 0; k < profiles_.size(); ++k)
      if (profiles_[k].speaker_id() == id) return k;
    return std::nullopt;
  }

  friend bool operator==(const SpeakerInventory&,
                         const SpeakerInventory&) = default;

 private:
  std::vector<SpeakerProfile> profiles_;
};

/// Serialized multi-talker reference: each speaker's transcription joined by
/// <sc>, terminated by <eos>, with one speaker label per token.
struct SerializedReference {
  TokenSeq tokens;
  std::vector<SpeakerId> speakers;

  friend bool operator==(const SerializedReference&,
                         const SerializedReference&) = default;
};

struct Utterance {
  SpeakerId speaker = -1;
  TokenSeq tokens;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

/// Per-speaker transcript. After `merge_utterances` speakers are distinct and
/// no utterance carries a special symbol.
struct AttributedTranscript {
  std::vector<Utterance> utterances;

  std::size_t num_words() const {
    std::size_t n = 0;
    for (const auto& u : utterances) n += u.tokens.size();
    return n;
  }

  friend bool operator==(const AttributedTranscript&,
                         const AttributedTranscript&) = default;
};

/// Split a <eos>-terminated token sequence at <sc> markers. Specials are
/// stripped; empty segments are kept.
inline std::vector<TokenSeq> segment_by_sc(std::span<const TokenId> tokens,
                                           const Vocabulary& vocab) {
  if (tokens.empty() || tokens.back() != vocab.eos_id())
    throw MalformedHypothesisError("token sequence lacks terminal <eos>");
  std::vector<TokenSeq> segments(1);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    TokenId t = tokens[i];
    if (t == vocab.eos_id())
      throw MalformedHypothesisError("<eos> before the end of the sequence");
    if (t == vocab.sc_id())
      segments.emplace_back();
    else
      segments.back().push_back(t);
  }
  return segments;
}

/// Inverse of `segment_by_sc`.
inline TokenSeq join_segments(const std::vector<TokenSeq>& segments,
                              const Vocabulary& vocab) {
  TokenSeq out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out.push_back(vocab.sc_id());
    out.insert(out.end(), segments[i].begin(), segments[i].end());
  }
  out.push_back(vocab.eos_id());
  return out;
}

/// Concatenate utterances of the same speaker (in order of first appearance)
/// and drop the ones left empty.
inline AttributedTranscript merge_utterances(
    const std::vector<Utterance>& utterances) {
  AttributedTranscript out;
  for (const auto& u : utterances) {
    auto it = std::find_if(
        out.utterances.begin(), out.utterances.end(),
        [&](const Utterance& o) { return o.speaker == u.speaker; });
    if (it == out.utterances.end()) {
      out.utterances.push_back(u);
    } else {
      it->tokens.insert(it->tokens.end(), u.tokens.begin(), u.tokens.end());
    }
  }
  std::erase_if(out.utterances,
                [](const Utterance& u) { return u.tokens.empty(); });
  return out;
}

enum class ViolationKind {
  kLengthMismatch,
  kEosPlacement,
  kTokenOutOfRange,
  kSegmentSpeaker,
  kAdjacentSameSpeaker,
  kSpeakerNotInInventory,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kLengthMismatch: return "length-mismatch";
    case ViolationKind::kEosPlacement: return "eos-placement";
    case ViolationKind::kTokenOutOfRange: return "token-out-of-range";
    case ViolationKind::kSegmentSpeaker: return "segment-speaker-violation";
    case ViolationKind::kAdjacentSameSpeaker: return "adjacent-same-speaker";
    case ViolationKind::kSpeakerNotInInventory:
      return "speaker-not-in-inventory";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;
};

/// Returns every invariant violation of `ref`; an empty list means valid.
inline std::vector<Violation> validate_reference(const SerializedReference& ref,
                                                 const Vocabulary& vocab,
                                                 const SpeakerInventory& inv) {
  std::vector<Violation> out;
  const auto& y = ref.tokens;
  const auto& s = ref.speakers;
  if (y.size() != s.size()) {
    out.push_back({ViolationKind::kLengthMismatch,
                   "tokens " + std::to_string(y.size()) + " vs speakers " +
                       std::to_string(s.size())});
  }
  std::size_t num_eos = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!vocab.contains(y[i])) {
      out.push_back({ViolationKind::kTokenOutOfRange,
                     "position " + std::to_string(i)});
    } else if (y[i] == vocab.eos_id()) {
      ++num_eos;
    }
  }
  if (y.empty() || y.back() != vocab.eos_id() || num_eos != 1)
    out.push_back({ViolationKind::kEosPlacement,
                   "expected exactly one <eos>, at the final position"});

  std::set<SpeakerId> missing;
  for (SpeakerId id : s)
    if (!inv.index_of(id)) missing.insert(id);
  for (SpeakerId id : missing)
    out.push_back({ViolationKind::kSpeakerNotInInventory,
                   "speaker " + std::to_string(id)});

  // Segment checks only make sense position-by-position.
  const std::size_t n = std::min(y.size(), s.size());
  std::optional<SpeakerId> seg_speaker, prev_seg_speaker;
  bool seg_bad = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seg_speaker) {
      seg_speaker = s[i];
    } else if (*seg_speaker != s[i] && !seg_bad) {
      out.push_back({ViolationKind::kSegmentSpeaker,
                     "position " + std::to_string(i)});
      seg_bad = true;
    }
    if (y[i] == vocab.sc_id() || y[i] == vocab.eos_id() || i + 1 == n) {
      if (prev_seg_speaker && seg_speaker && *prev_seg_speaker == *seg_speaker)
        out.push_back({ViolationKind::kAdjacentSameSpeaker,
                       "segment ending at " + std::to_string(i)});
      prev_seg_speaker = seg_speaker;
      seg_speaker.reset();
      seg_bad = false;
    }
  }
  return out;
}

/// Reference utterances per speaker. Requires a valid reference.
inline AttributedTranscript reference_transcript(const SerializedReference& ref,
                                                 const Vocabulary& vocab) {
  auto segments = segment_by_sc(ref.tokens, vocab);
  std::vector<Utterance> utts;
  std::size_t pos = 0;
  for (auto& seg : segments) {
    const SpeakerId spk = ref.speakers.at(pos);
    pos += seg.size() + 1;
    utts.push_back({spk, std::move(seg)});
  }
  return merge_utterances(utts);
}

/// Number of distinct speakers in a reference.
inline int reference_speaker_count(const SerializedReference& ref) {
  return static_cast<int>(
      std::set<SpeakerId>(ref.speakers.begin(), ref.speakers.end()).size());
}

}  // namespace sambr
