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

#include <filesystem>
#include <fstream>

#include "sambr/io.hpp"

namespace sambr {
namespace {

namespace fs = std::filesystem;
using io::json;

class IoTest : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / ("sambr_io_" + std::string(info->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  static SynthConfig tiny() {
    SynthConfig c;
    c.train_size = 6;
    c.dev_size = 3;
    c.test_size = 3;
    c.feature_dim = 8;
    c.num_words = 6;
    c.num_speakers = 10;
    return c;
  }
  static ModelConfig model_for(const SynthConfig& s) {
    ModelConfig m;
    m.feature_dim = s.feature_dim;
    m.profile_dim = s.feature_dim;
    m.vocab_size = s.num_words + 2;
    m.encoder_dim = m.decoder_dim = m.out_dim = 6;
    m.speaker_dim = m.query_dim = m.embed_dim = m.attention_dim = 4;
    return m;
  }
  void write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
  }
};

void expect_same(const Sample& a, const Sample& b) {
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.x.num_frames(), b.x.num_frames());
  EXPECT_EQ(a.x.data(), b.x.data());
  EXPECT_EQ(a.ref.tokens, b.ref.tokens);
  EXPECT_EQ(a.ref.speakers, b.ref.speakers);
  EXPECT_EQ(a.true_count, b.true_count);
  EXPECT_EQ(a.meta.offsets, b.meta.offsets);
  ASSERT_EQ(a.inventory.size(), b.inventory.size());
  for (std::size_t k = 0; k < a.inventory.size(); ++k) {
    EXPECT_EQ(a.inventory[k].speaker_id(), b.inventory[k].speaker_id());
    EXPECT_EQ(a.inventory[k].vector(), b.inventory[k].vector());
  }
}

TEST_F(IoTest, DatasetRoundTripIsExact) {
  const Dataset d = generate_dataset(tiny());
  const json m = io::write_dataset(d, dir);
  EXPECT_EQ(m["splits"]["train"]["count"], 6);
  EXPECT_EQ(m["splits"]["train"]["speaker_counts"]["2"], 2);
  EXPECT_EQ(m["sot_order"], "start_time");
  const Dataset back = io::load_dataset(dir);
  EXPECT_EQ(back.vocab.tokens(), d.vocab.tokens());
  EXPECT_EQ(io::to_json(back.config), io::to_json(d.config));
  ASSERT_EQ(back.train.size(), d.train.size());
  for (std::size_t i = 0; i < d.train.size(); ++i) expect_same(back.train[i], d.train[i]);
  for (std::size_t i = 0; i < d.test.size(); ++i) expect_same(back.test[i], d.test[i]);
  // the hash depends only on the content
  const fs::path other = dir / "again";
  EXPECT_EQ(io::write_dataset(back, other)["content_hash"], m["content_hash"]);
}

TEST_F(IoTest, CorruptSampleReportsLine) {
  const Dataset d = generate_dataset(tiny());
  io::write_dataset(d, dir);
  std::string text = io::read_file(dir / "dev.jsonl");
  const auto second = text.find('\n') + 1;
  text.insert(second, "{\"id\": 5\n");
  io::write_file(dir / "dev.jsonl", text);
  try {
    io::load_dataset(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(e.file().find("dev.jsonl"), std::string::npos);
  }
  // a reference that breaks the serialization rules is rejected as well
  json j = io::to_json(d.dev[0]);
  j["tokens"].back() = 0;
  write("bad.jsonl", j.dump() + "\n");
  EXPECT_THROW(io::load_samples(dir / "bad.jsonl", d.vocab), ParseError);
}

TEST_F(IoTest, CheckpointRoundTripPreservesDecoding) {
  const SynthConfig sc = tiny();
  const Dataset d = generate_dataset(sc);
  const Model m(model_for(sc), 17);
  io::save_checkpoint(dir / "ck" / "checkpoint.json", m, d.vocab, {{"stage", "sa_mmi"}});
  const io::Checkpoint ck = io::load_checkpoint(dir / "ck" / "checkpoint.json");
  EXPECT_TRUE(ck.model.params() == m.params());
  EXPECT_EQ(ck.meta["stage"], "sa_mmi");
  EXPECT_EQ(io::to_json(ck.model.config()), io::to_json(m.config()));
  const BeamConfig bc{4, 2, 12, true, 1.0};
  const auto a = beam_search(m, d.test[0].x, d.test[0].inventory, d.vocab, bc);
  const auto b = beam_search(ck.model, d.test[0].x, d.test[0].inventory, d.vocab, bc);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t r = 0; r < a.entries.size(); ++r) {
    EXPECT_EQ(a.entries[r].hyp.tokens, b.entries[r].hyp.tokens);
    EXPECT_EQ(a.entries[r].hyp.log_joint, b.entries[r].hyp.log_joint);
  }

  json bad = io::checkpoint_json(m, d.vocab);
  bad["version"] = 99;
  EXPECT_THROW(io::checkpoint_from_json(bad), ContractError);
  bad = io::checkpoint_json(m, d.vocab);
  bad["params"][0]["shape"] = {1, 1};
  EXPECT_THROW(io::checkpoint_from_json(bad), DimensionError);
}

TEST_F(IoTest, NBestRoundTrip) {
  const SynthConfig sc = tiny();
  const Dataset d = generate_dataset(sc);
  const Model m(model_for(sc), 3);
  NBestList nb = beam_search(m, d.dev[1].x, d.dev[1].inventory, d.vocab, {6, 3, 10, true, 1.0});
  nb.ref_id = d.dev[1].id;
  io::write_file(dir / "nbest.jsonl", io::to_jsonl(io::nbest_to_json(nb, d.dev[1].inventory)));
  const auto back = io::load_nbest(dir / "nbest.jsonl", d.vocab);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].ref_id, nb.ref_id);
  ASSERT_EQ(back[0].entries.size(), nb.entries.size());
  for (std::size_t r = 0; r < nb.entries.size(); ++r) {
    const auto& x = nb.entries[r];
    const auto& y = back[0].entries[r];
    EXPECT_EQ(x.hyp.tokens, y.hyp.tokens);
    EXPECT_EQ(x.hyp.log_joint, y.hyp.log_joint);
    EXPECT_EQ(x.norm_score, y.norm_score);
    EXPECT_EQ(x.hyp.betas, y.hyp.betas);
    EXPECT_EQ(x.transcript.utterances.size(), y.transcript.utterances.size());
    EXPECT_EQ(sa_error_count(x.transcript, y.transcript), 0);
  }
  // ranks must start at 0 and be consecutive
  auto rows = io::nbest_to_json(nb, d.dev[1].inventory, false);
  rows[0]["rank"] = 1;
  io::write_file(dir / "gap.jsonl", io::to_jsonl(rows));
  EXPECT_THROW(io::load_nbest(dir / "gap.jsonl", d.vocab), ParseError);
}

TEST_F(IoTest, TranscriptsAndReports) {
  const AttributedTranscript t{{{4, {0, 1}}, {9, {2}}}};
  json row = io::to_json("s1", t);
  row["true_count"] = 2;
  io::write_file(dir / "hyp.jsonl", io::to_jsonl({row, io::to_json("s2", AttributedTranscript{})}));
  const auto recs = io::load_transcripts(dir / "hyp.jsonl");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, "s1");
  EXPECT_EQ(recs[0].true_count, 2);
  EXPECT_EQ(recs[1].true_count, 0);
  EXPECT_EQ(sa_error_count(recs[0].transcript, t), 0);
  EXPECT_TRUE(recs[1].transcript.utterances.empty());

  MetricReport r;
  r.add(AttributedTranscript{{{4, {0}}}}, t);
  const json j = io::to_json(r);
  EXPECT_EQ(j["ser_policy"], "unit_pad");
  EXPECT_EQ(j["speaker_scoring"], "segment_argmax_avg");
  EXPECT_EQ(j["sa_wer"]["ref_words"], 3);
  EXPECT_EQ(j["sa_wer"]["counts"]["deletions"], 2);
  EXPECT_DOUBLE_EQ(j["sa_wer"]["rate"].get<double>(), 2.0 / 3.0);
  EXPECT_FALSE(io::to_json(MetricReport{})["wer"].contains("rate"));
}

TEST_F(IoTest, ConfigMergeAndErrors) {
  ExperimentConfig c = default_experiment_config(1);
  io::merge_into(c, json::parse(R"({"seed": 9, "decode": {"beam_size": 3, "nbest_size": 2},
                                    "train_mbr": {"epochs": 2}})"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.decode.beam_size, 3);
  EXPECT_EQ(c.decode.nbest_size, 2);
  EXPECT_EQ(c.mbr.epochs, 2);
  ExperimentConfig round = default_experiment_config(2);
  io::merge_into(round, io::to_json(c));
  EXPECT_EQ(io::to_json(round), io::to_json(c));

  EXPECT_THROW(io::merge_into(c, json::parse(R"({"decoder": {}})")), ConfigError);
  EXPECT_THROW(io::merge_into(c, json::parse(R"({"decode": {"beam": 3}})")), ConfigError);
  EXPECT_THROW(io::merge_into(c, json::array()), ConfigError);

  write("broken.json", "{\n  \"seed\": 1,\n  oops\n}\n");
  try {
    io::parse_json_file(dir / "broken.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(io::read_file(dir / "missing.json"), IoError);
}

}  // namespace
}  // namespace sambr
