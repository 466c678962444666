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

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>

#include "sambr/synthdata.hpp"

namespace sambr {
namespace {

SynthConfig small(std::uint64_t seed = 3) {
  SynthConfig c;
  c.seed = seed;
  c.train_size = 60;
  c.dev_size = 30;
  c.test_size = 30;
  return c;
}

class SynthTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { data_ = new Dataset(generate_dataset(small())); }
  static void TearDownTestSuite() {
    delete data_;
    data_ = nullptr;
  }
  static const Dataset& data() { return *data_; }
  static std::vector<const Sample*> all() {
    std::vector<const Sample*> v;
    for (const auto* split : {&data_->train, &data_->dev, &data_->test})
      for (const auto& s : *split) v.push_back(&s);
    return v;
  }

 private:
  static Dataset* data_;
};
Dataset* SynthTest::data_ = nullptr;

TEST_F(SynthTest, ReferencesAreWellFormed) {
  for (const Sample* s : all()) {
    EXPECT_TRUE(validate_reference(s->ref, data().vocab, s->inventory).empty()) << s->id;
    EXPECT_EQ(reference_speaker_count(s->ref), s->true_count);
    EXPECT_EQ(static_cast<int>(s->meta.offsets.size()), s->true_count);
    EXPECT_EQ(s->x.dim(), 32u);
    const auto segs = segment_by_sc(s->ref.tokens, data().vocab);
    ASSERT_EQ(segs.size(), static_cast<std::size_t>(s->true_count));
    for (std::size_t u = 0; u < segs.size(); ++u) {
      EXPECT_GE(segs[u].size(), 2u);
      EXPECT_LE(segs[u].size(), 5u);
      EXPECT_EQ(s->meta.lengths[u], static_cast<int>(segs[u].size()) * 3);
    }
  }
}

TEST_F(SynthTest, TimingFollowsStartOrderAndOverlaps) {
  for (const Sample* s : all()) {
    const auto& o = s->meta.offsets;
    const auto& l = s->meta.lengths;
    EXPECT_EQ(o.front(), 0);
    EXPECT_TRUE(std::is_sorted(o.begin(), o.end()));
    int end = 0;
    for (std::size_t u = 0; u < o.size(); ++u) end = std::max(end, o[u] + l[u]);
    EXPECT_EQ(static_cast<int>(s->x.num_frames()), end);
    if (o.size() < 2) continue;
    for (std::size_t u = 0; u < o.size(); ++u) {
      bool overlaps = false;
      for (std::size_t v = 0; v < o.size(); ++v)
        if (u != v && o[u] < o[v] + l[v] && o[v] < o[u] + l[u]) overlaps = true;
      EXPECT_TRUE(overlaps) << s->id;
    }
  }
  for (const auto& s : data().train)
    for (std::size_t u = 1; u < s.meta.offsets.size(); ++u)
      EXPECT_GE(s.meta.offsets[u] - s.meta.offsets[u - 1], 3) << s.id;
}

TEST_F(SynthTest, InventoryCoversTalkersWithinBounds) {
  for (const Sample* s : all()) {
    const auto K = static_cast<int>(s->inventory.size());
    EXPECT_GE(K, s->true_count);
    EXPECT_LE(K, 8);
    for (SpeakerId id : s->ref.speakers) EXPECT_TRUE(s->inventory.index_of(id).has_value());
  }
}

TEST_F(SynthTest, SpeakerCountsAreBalanced) {
  for (const auto* split : {&data().train, &data().dev, &data().test}) {
    std::map<int, int> n;
    for (const auto& s : *split) ++n[s.true_count];
    ASSERT_EQ(n.size(), 3u);
    EXPECT_EQ(n[1], n[3]);
    EXPECT_EQ(n[1], n[2]);
  }
}

TEST_F(SynthTest, Deterministic) {
  const Dataset again = generate_dataset(small());
  ASSERT_EQ(again.train.size(), data().train.size());
  for (std::size_t i = 0; i < again.train.size(); ++i) {
    EXPECT_EQ(again.train[i].id, data().train[i].id);
    EXPECT_EQ(again.train[i].x.data(), data().train[i].x.data());
    EXPECT_EQ(again.train[i].ref.tokens, data().train[i].ref.tokens);
    EXPECT_EQ(again.train[i].ref.speakers, data().train[i].ref.speakers);
  }
  const Dataset other = generate_dataset(small(4));
  EXPECT_NE(other.train[0].x.data(), data().train[0].x.data());
}

TEST_F(SynthTest, ProfilesIdentifyTheirSpeaker) {
  const SignatureBank bank(small());
  int right = 0, total = 0;
  for (const Sample* s : all())
    for (const auto& p : s->inventory.profiles()) {
      int best = -1;
      double best_dot = -1e9;
      for (int k = 0; k < 40; ++k) {
        const double d = SignatureBank::dot(p.vector(), bank.speaker(k));
        if (d > best_dot) best_dot = d, best = k;
      }
      right += best == p.speaker_id();
      ++total;
    }
  EXPECT_GE(right, total * 95 / 100);
}

// A least-squares linear map from single-speaker frames to one-hot tokens
// must generalize to held-out samples.
TEST_F(SynthTest, TokensAreLinearlyDecodable) {
  auto collect = [&](const std::vector<Sample>& split, Eigen::MatrixXd& X, Eigen::VectorXi& y) {
    std::vector<std::pair<std::vector<double>, int>> rows;
    for (const auto& s : split) {
      if (s.true_count != 1) continue;
      for (std::size_t t = 0; t < s.x.num_frames(); ++t) {
        const auto f = s.x.frame(t);
        rows.push_back({{f.begin(), f.end()}, s.ref.tokens[t / 3]});
      }
    }
    X.resize(static_cast<long>(rows.size()), 33);
    y.resize(static_cast<long>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t d = 0; d < 32; ++d) X(static_cast<long>(r), static_cast<long>(d)) = rows[r].first[d];
      X(static_cast<long>(r), 32) = 1.0;
      y(static_cast<long>(r)) = rows[r].second;
    }
  };
  Eigen::MatrixXd Xtr, Xte;
  Eigen::VectorXi ytr, yte;
  collect(data().train, Xtr, ytr);
  collect(data().dev, Xte, yte);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(Xtr.rows(), 20);
  for (long r = 0; r < Xtr.rows(); ++r) Y(r, ytr(r)) = 1.0;
  const Eigen::MatrixXd A = Xtr.transpose() * Xtr + 1e-3 * Eigen::MatrixXd::Identity(33, 33);
  const Eigen::MatrixXd W = A.ldlt().solve(Xtr.transpose() * Y);
  const Eigen::MatrixXd P = Xte * W;
  long correct = 0;
  for (long r = 0; r < P.rows(); ++r) {
    Eigen::Index best;
    P.row(r).maxCoeff(&best);
    correct += best == yte(r);
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(P.rows()), 0.9);
}

TEST(SynthConfigTest, Validation) {
  auto bad = [](auto mutate) {
    SynthConfig c = small();
    mutate(c);
    return c;
  };
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.max_speakers = 0; })), ConfigError);
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.max_inventory = 2; })), ConfigError);
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.num_speakers = 5; })), ConfigError);
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.min_tokens = 6; })), ConfigError);
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.noise = -1; })), ConfigError);
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) { c.orthogonal_speakers = true; c.feature_dim = 8; c.num_speakers = 9; })),
               ConfigError);
  // start separation that no train mixture can satisfy
  EXPECT_THROW(generate_dataset(bad([](SynthConfig& c) {
                 c.min_offset_frames = 100;
                 c.max_retries = 5;
               })),
               ConfigError);
}

TEST(SynthConfigTest, OrthogonalSignatures) {
  SynthConfig c = small();
  c.orthogonal_speakers = true;
  c.num_speakers = 32;
  const SignatureBank bank(c);
  for (int i = 0; i < c.num_speakers; ++i)
    for (int j = 0; j <= i; ++j)
      EXPECT_NEAR(SignatureBank::dot(bank.speaker(i), bank.speaker(j)), i == j ? 1.0 : 0.0, 1e-9);
}

}  // namespace
}  // namespace sambr
