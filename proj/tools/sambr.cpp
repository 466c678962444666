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

// sambr: synthetic data generation, SA-MMI / SA-MBR training, decoding,
// scoring, gradient self-check and the ablation sweep.
//
// Option precedence: command-line flags > --config file > built-in defaults.
// Every command writes resolved_config.json next to its outputs. Failures
// print {"error": {...}} on stderr and exit with status 2.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sambr/error.hpp"
#include "sambr/experiment.hpp"
#include "sambr/gradcheck.hpp"
#include "sambr/io.hpp"
#include "sambr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sambr;

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 1;
  int beam = 16;
  int nbest = 4;
  std::string length_norm = "on";
  double gamma_mmi = 0.1;
  double gamma_decode = 1.0;
  int threads = 1;
  std::string out = ".";
  int epochs = 0;
  double lr = 0.0;

  std::vector<CLI::Option*> o_seed;
  std::vector<CLI::Option*> o_beam;
  std::vector<CLI::Option*> o_nbest;
  std::vector<CLI::Option*> o_ln;
  std::vector<CLI::Option*> o_gmmi;
  std::vector<CLI::Option*> o_gdec;
  std::vector<CLI::Option*> o_threads;
  std::vector<CLI::Option*> o_epochs;
  std::vector<CLI::Option*> o_lr;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  f.o_seed.push_back(app->add_option("--seed", f.seed, "master seed"));
  f.o_beam.push_back(app->add_option("--beam", f.beam, "decoding beam size")->check(CLI::PositiveNumber));
  f.o_nbest.push_back(app->add_option("--nbest", f.nbest, "N-best size")->check(CLI::PositiveNumber));
  f.o_ln.push_back(app->add_option("--length-norm", f.length_norm, "on|off")
               ->check(CLI::IsMember({"on", "off"})));
  f.o_gmmi.push_back(app->add_option("--gamma-mmi", f.gamma_mmi, "speaker scale in SA-MMI")
                 ->check(CLI::Range(0.0, 1.0)));
  f.o_gdec.push_back(app->add_option("--gamma-decode", f.gamma_decode, "speaker scale in decoding")
                 ->check(CLI::NonNegativeNumber));
  f.o_threads.push_back(app->add_option("--threads", f.threads, "decoding workers")
                    ->check(CLI::PositiveNumber));
  app->add_option("--out", f.out, "output directory");
}

void add_training(CLI::App* app, CommonFlags& f) {
  f.o_epochs.push_back(app->add_option("--epochs", f.epochs, "training epochs")
                   ->check(CLI::NonNegativeNumber));
  f.o_lr.push_back(app->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber));
}

// Each flag is registered once per subcommand; only the active one counts.
bool given(const std::vector<CLI::Option*>& os) {
  for (const CLI::Option* o : os)
    if (o->count() > 0) return true;
  return false;
}

/// defaults -> config file -> flags
ExperimentConfig resolve(const CommonFlags& f, bool mbr_stage) {
  ExperimentConfig c = default_experiment_config();
  if (!f.config.empty()) io::merge_into(c, io::parse_json_file(f.config));
  if (given(f.o_seed)) c.seed = f.seed;
  if (given(f.o_threads)) c.threads = f.threads;
  if (given(f.o_beam)) c.decode.beam_size = f.beam;
  if (given(f.o_nbest)) {
    c.decode.nbest_size = f.nbest;
    c.mbr.mbr.nbest_beam.nbest_size = f.nbest;
    c.mbr.mbr.nbest_beam.beam_size = f.nbest;
  }
  if (given(f.o_ln)) {
    const bool ln = f.length_norm == "on";
    c.decode.length_norm = ln;
    c.mbr.mbr.nbest_beam.length_norm = ln;
    c.mbr.eval_beam.length_norm = ln;
    c.mmi.eval_beam.length_norm = ln;
  }
  if (given(f.o_gmmi)) {
    c.mmi.gamma = f.gamma_mmi;
    c.model.gamma = f.gamma_mmi;
  }
  if (given(f.o_gdec)) {
    c.decode.gamma_decode = f.gamma_decode;
    c.mbr.mbr.nbest_beam.gamma_decode = f.gamma_decode;
  }
  TrainConfig& t = mbr_stage ? c.mbr : c.mmi;
  if (given(f.o_epochs)) t.epochs = f.epochs;
  if (given(f.o_lr)) t.adam.lr = f.lr;
  finalize(c);
  if (c.decode.nbest_size > c.decode.beam_size) c.decode.nbest_size = c.decode.beam_size;
  c.decode.validate();
  c.mbr.mbr.nbest_beam.validate();
  c.synth.validate();
  return c;
}

void dump_config(const fs::path& out, const std::string& command, const ExperimentConfig& c,
                 json extra = json::object()) {
  json j = io::to_json(c);
  j["command"] = command;
  for (auto& [k, v] : extra.items()) j[k] = v;
  io::write_file(out / "resolved_config.json", j.dump(2) + "\n");
}

StageProgressFn stderr_progress() {
  return [](const StageLog& l) {
    if (std::isnan(l.row.dev_sa_wer)) return;
    std::fprintf(stderr, "[%s] iter %ld epoch %d loss %.4f dev_sa_wer %s\n", l.stage.c_str(),
                 l.row.iteration, l.row.epoch, l.row.loss,
                 format_rate(l.row.dev_sa_wer).c_str());
  };
}

std::string curve_csv(const TrainResult& r, const char* loss_name) {
  std::string s = std::string("iteration,epoch,") + loss_name + ",dev_sa_wer\n";
  for (const auto& row : r.log) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%ld,%d,%.10g,", row.iteration, row.epoch, row.loss);
    s += buf;
    if (!std::isnan(row.dev_sa_wer)) s += format_rate(row.dev_sa_wer);
    s += "\n";
  }
  return s;
}

const std::vector<Sample>& pick_split(const Dataset& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "dev") return d.dev;
  if (split == "test") return d.test;
  throw ConfigError("unknown split '" + split + "'");
}

Dataset data_or_synth(const std::string& dir, const ExperimentConfig& c) {
  return dir.empty() ? generate_dataset(c.synth) : io::load_dataset(dir);
}

void require_model_fit(const ModelConfig& mc, const Dataset& d) {
  if (mc.vocab_size != d.vocab.size())
    throw ConfigError("checkpoint vocabulary size does not match the dataset");
}

int cmd_synth(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f, false);
  const Dataset d = generate_dataset(c.synth);
  const json m = io::write_dataset(d, f.out);
  dump_config(f.out, "synth", c);
  std::printf("%s\n", m.dump().c_str());
  return 0;
}

int cmd_train_mmi(const CommonFlags& f, const std::string& data) {
  const ExperimentConfig c = resolve(f, false);
  const Dataset d = io::load_dataset(data);
  TrainResult log;
  Model m = train_mmi_model(c, d, &log, stderr_progress());
  io::save_checkpoint(fs::path(f.out) / "checkpoint.json", m, d.vocab,
                      {{"criterion", "sa-mmi"}, {"best_dev_sa_wer", log.best_dev_sa_wer}});
  io::write_file(fs::path(f.out) / "loss_curve.csv", curve_csv(log, "loss"));
  dump_config(f.out, "train-mmi", c, {{"data", data}});
  return 0;
}

int cmd_train_mbr(const CommonFlags& f, const std::string& data, const std::string& init) {
  const ExperimentConfig c = resolve(f, true);
  const Dataset d = io::load_dataset(data);
  io::Checkpoint start = io::load_checkpoint(init);
  require_model_fit(start.model.config(), d);
  TrainResult log;
  Model m = train_mbr_model(c, d, start.model, &log, stderr_progress());
  io::save_checkpoint(fs::path(f.out) / "checkpoint.json", m, d.vocab,
                      {{"criterion", "sa-mbr"}, {"best_dev_sa_wer", log.best_dev_sa_wer}});
  io::write_file(fs::path(f.out) / "risk_curve.csv", curve_csv(log, "expected_errors"));
  dump_config(f.out, "train-mbr", c, {{"data", data}, {"init", init}});
  return 0;
}

int cmd_decode(const CommonFlags& f, const std::string& data, const std::string& ckpt,
               const std::string& split) {
  const ExperimentConfig c = resolve(f, false);
  const Dataset d = io::load_dataset(data);
  const io::Checkpoint cp = io::load_checkpoint(ckpt);
  require_model_fit(cp.model.config(), d);
  const auto& samples = pick_split(d, split);
  EvalResult ev = evaluate(cp.model, samples, d.vocab, c.decode, true, c.threads);
  std::string nbest, hyp, ref;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    nbest += io::to_jsonl(io::nbest_to_json(ev.nbest[i], samples[i].inventory));
    json h = io::to_json(samples[i].id, ev.hypotheses[i]);
    hyp += h.dump() + "\n";
    json r = io::to_json(samples[i].id, reference_transcript(samples[i].ref, d.vocab));
    r["true_count"] = samples[i].true_count;
    ref += r.dump() + "\n";
  }
  io::write_file(fs::path(f.out) / "nbest.jsonl", nbest);
  io::write_file(fs::path(f.out) / "hyp.jsonl", hyp);
  io::write_file(fs::path(f.out) / "ref.jsonl", ref);
  dump_config(f.out, "decode", c, {{"data", data}, {"checkpoint", ckpt}, {"split", split}});
  return 0;
}

int cmd_score(const CommonFlags& f, const std::string& hyp_path, const std::string& ref_path) {
  const auto hyps = io::load_transcripts(hyp_path);
  const auto refs = io::load_transcripts(ref_path);
  std::map<std::string, const io::TranscriptRecord*> by_id;
  for (const auto& h : hyps)
    if (!by_id.emplace(h.id, &h).second) throw ContractError("duplicate hypothesis id " + h.id);
  EvalResult ev;
  std::vector<std::pair<int, int>> counts;
  for (const auto& r : refs) {
    auto it = by_id.find(r.id);
    const AttributedTranscript empty;
    const AttributedTranscript& h = it == by_id.end() ? empty : it->second->transcript;
    const int actual = r.true_count > 0 ? r.true_count : estimate_speaker_count(r.transcript);
    MetricReport m;
    m.add(h, r.transcript);
    ev.total += m;
    ev.by_count[actual] += m;
    counts.emplace_back(estimate_speaker_count(h), actual);
  }
  ev.confusion = speaker_count_confusion(counts);
  const json report = io::to_json(ev);
  io::write_file(fs::path(f.out) / "report.json", report.dump(2) + "\n");
  io::write_file(fs::path(f.out) / "confusion.csv", ev.confusion.to_csv());
  std::printf("%s\n", report.dump().c_str());
  return 0;
}

int cmd_gradcheck(const CommonFlags& f, int instances) {
  const ExperimentConfig c = resolve(f, false);
  const GradcheckReport r = run_gradcheck(c.seed, instances);
  json cases = json::array();
  for (const auto& k : r.cases)
    cases.push_back({{"seed", k.seed},
                     {"inject_rel_err", k.inject_rel_err},
                     {"fd_rel_err", k.fd_rel_err},
                     {"probes", k.probes}});
  const json j = {{"result", r.passed ? "pass" : "fail"},
                  {"max_inject_rel_err", r.max_inject_rel_err},
                  {"max_fd_rel_err", r.max_fd_rel_err},
                  {"cases", std::move(cases)}};
  io::write_file(fs::path(f.out) / "gradcheck.json", j.dump(2) + "\n");
  std::printf("%s max_inject_rel_err=%.3e max_fd_rel_err=%.3e\n", r.passed ? "pass" : "fail",
              r.max_inject_rel_err, r.max_fd_rel_err);
  return r.passed ? 0 : 1;
}

int cmd_pipeline(const CommonFlags& f, const std::string& data) {
  const ExperimentConfig c = resolve(f, false);
  const Dataset d = data_or_synth(data, c);
  PipelineResult r = run_pipeline(c, d, stderr_progress());
  const fs::path out = f.out;
  io::save_checkpoint(out / "sa_mmi.json", Model(c.model, r.mmi_params), d.vocab,
                      {{"criterion", "sa-mmi"}});
  io::save_checkpoint(out / "sa_mbr.json", Model(c.model, r.mbr_params), d.vocab,
                      {{"criterion", "sa-mbr"}});
  io::write_file(out / "comparison.csv", comparison_csv(r.mmi_dev, r.mbr_dev));
  io::write_file(out / "sa_mmi_breakdown.csv", breakdown_csv(r.mmi_dev));
  io::write_file(out / "sa_mbr_breakdown.csv", breakdown_csv(r.mbr_dev));
  io::write_file(out / "sa_mmi_confusion.csv", r.mmi_dev.confusion.to_csv());
  io::write_file(out / "sa_mbr_confusion.csv", r.mbr_dev.confusion.to_csv());
  io::write_file(out / "sa_mmi_loss_curve.csv", curve_csv(r.mmi_train, "loss"));
  io::write_file(out / "sa_mbr_risk_curve.csv", curve_csv(r.mbr_train, "expected_errors"));
  dump_config(out, "pipeline", c, {{"data", data}});
  std::printf("%s", comparison_csv(r.mmi_dev, r.mbr_dev).c_str());
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::string& data) {
  SweepConfig sc;
  sc.base = resolve(f, false);
  const Dataset d = data_or_synth(data, sc.base);
  const SweepTables t = run_sweep(sc, d, stderr_progress());
  const fs::path out = f.out;
  io::write_file(out / "length_norm.csv", t.length_norm);
  io::write_file(out / "nbest.csv", t.nbest);
  io::write_file(out / "beam.csv", t.beam);
  dump_config(out, "sweep", sc.base, {{"data", data}});
  std::printf("%s\n%s\n%s", t.length_norm.c_str(), t.nbest.c_str(), t.beam.c_str());
  return 0;
}

void print_error(const std::string& kind, const std::string& msg, const ParseError* pe = nullptr) {
  json e = {{"kind", kind}, {"message", msg}};
  if (pe) {
    e["file"] = pe->file();
    e["line"] = pe->line();
  }
  std::cerr << json{{"error", e}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-attributed MBR training on synthetic multi-talker data"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string data, init, ckpt, split = "dev", hyp, ref;
  int instances = 20;

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  add_common(synth, f);

  auto* mmi = app.add_subcommand("train-mmi", "SA-MMI training from scratch");
  add_common(mmi, f);
  add_training(mmi, f);
  mmi->add_option("--data", data, "dataset directory")->required();

  auto* mbr = app.add_subcommand("train-mbr", "SA-MBR fine-tuning from a checkpoint");
  add_common(mbr, f);
  add_training(mbr, f);
  mbr->add_option("--data", data, "dataset directory")->required();
  mbr->add_option("--init", init, "starting checkpoint")->required()->check(CLI::ExistingFile);

  auto* dec = app.add_subcommand("decode", "beam search, writes N-best and transcripts");
  add_common(dec, f);
  dec->add_option("--data", data, "dataset directory")->required();
  dec->add_option("--checkpoint", ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  dec->add_option("--split", split, "train|dev|test")
      ->check(CLI::IsMember({"train", "dev", "test"}));

  auto* score = app.add_subcommand("score", "SER / WER / SA-WER and speaker counting");
  add_common(score, f);
  score->add_option("--hyp", hyp, "hypothesis transcripts JSONL")->required()->check(CLI::ExistingFile);
  score->add_option("--ref", ref, "reference transcripts JSONL")->required()->check(CLI::ExistingFile);

  auto* gc = app.add_subcommand("gradcheck", "SA-MBR gradient self-check");
  add_common(gc, f);
  gc->add_option("--instances", instances, "random tiny instances")->check(CLI::PositiveNumber);

  auto* pipe = app.add_subcommand("pipeline", "SA-MMI then SA-MBR, dev comparison tables");
  add_common(pipe, f);
  add_training(pipe, f);
  pipe->add_option("--data", data, "dataset directory (synthesized when omitted)");

  auto* sweep = app.add_subcommand("sweep", "length-norm, N-best and beam-size tables");
  add_common(sweep, f);
  sweep->add_option("--data", data, "dataset directory (synthesized when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*synth) return cmd_synth(f);
    if (*mmi) return cmd_train_mmi(f, data);
    if (*mbr) return cmd_train_mbr(f, data, init);
    if (*dec) return cmd_decode(f, data, ckpt, split);
    if (*score) return cmd_score(f, hyp, ref);
    if (*gc) return cmd_gradcheck(f, instances);
    if (*pipe) return cmd_pipeline(f, data);
    if (*sweep) return cmd_sweep(f, data);
  } catch (const ParseError& e) {
    print_error(e.kind(), e.what(), &e);
    return 2;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    print_error("parse", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 2;
  }
  return 2;
}
