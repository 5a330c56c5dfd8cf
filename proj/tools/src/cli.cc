// Copyright 2026 The kwsxattn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kws/cli.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kws/config.h"
#include "kws/data.h"
#include "kws/errors.h"
#include "kws/gradcheck.h"
#include "kws/metrics.h"
#include "kws/model.h"
#include "kws/trainer.h"

namespace kws::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kAsrFile = "asr.bin";
constexpr const char* kKwsTrainFile = "kws_train.bin";
constexpr const char* kKwsEvalFile = "kws_eval.bin";
constexpr const char* kLogFile = "train_log.tsv";
constexpr const char* kFinalCheckpoint = "model.ckpt";

struct ConfigFlags {
  std::string path;
  std::vector<std::string> overrides;
  int threads = 0;
};

void AddConfigFlags(CLI::App* cmd, ConfigFlags* flags) {
  cmd->add_option("--config", flags->path, "Config file of 'key = value' lines");
  cmd->add_option("--set", flags->overrides, "Override one key, e.g. --set train.epochs=3")
      ->take_all();
}

void AddThreadsFlag(CLI::App* cmd, ConfigFlags* flags) {
  cmd->add_option("--threads", flags->threads, "Worker threads (results do not depend on the count)")
      ->check(CLI::PositiveNumber);
}

RunConfig ResolveConfig(const ConfigFlags& flags) {
  RunConfig cfg = flags.path.empty() ? RunConfig::Desk() : LoadRunConfig(flags.path);
  for (const std::string& o : flags.overrides) ApplyOverride(cfg, o);
  if (flags.threads > 0) cfg.train.threads = flags.threads;
  cfg.Validate();
  return cfg;
}

void PrintConfig(std::ostream& out, const RunConfig& cfg) {
  out << "# config\n" << cfg.ToString();
  out.flush();
}

std::string Fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string Sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

void PrintDatasetSummary(std::ostream& out, const std::string& name, const Dataset& ds) {
  std::size_t frames = 0;
  for (const Utterance& u : ds.utterances) frames += u.features.rows();
  out << name << ": " << ds.size() << " utterances, " << frames << " frames, dim " << ds.dim
      << ", seed " << ds.seed;
  if (ds.kind == DatasetKind::kKws) {
    out << ", " << ds.CountLabel(PhraseLabel::kPositive) << " positive, "
        << ds.CountLabel(PhraseLabel::kNegative) << " negative";
  }
  out << '\n';
}

Dataset ReadKind(const fs::path& path, DatasetKind kind) {
  Dataset ds = ReadDataset(path);
  if (ds.kind != kind) {
    throw ConfigError(path.string() + " holds the wrong dataset kind");
  }
  return ds;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

int GenData(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  EnsureDir(out_dir);
  const Dataset asr = SynthAsr(cfg.synth);
  const Dataset kws = SynthKws(cfg.synth, KwsSplit::kTrain);
  const Dataset eval = SynthKws(cfg.synth, KwsSplit::kEval);
  WriteDataset(out_dir / kAsrFile, asr);
  WriteDataset(out_dir / kKwsTrainFile, kws);
  WriteDataset(out_dir / kKwsEvalFile, eval);
  PrintDatasetSummary(out, kAsrFile, asr);
  PrintDatasetSummary(out, kKwsTrainFile, kws);
  PrintDatasetSummary(out, kKwsEvalFile, eval);
  return kExitOk;
}

// Log lines of epochs before `start_epoch` from a previous run in `path`.
std::vector<std::string> KeptLogLines(const fs::path& path, int start_epoch) {
  std::vector<std::string> kept;
  if (start_epoch == 0) return kept;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string() + " to resume");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (std::stoi(line) < start_epoch) kept.push_back(line);
  }
  return kept;
}

struct EpochMeans {
  int epoch = -1;
  double phone = 0.0, phrase = 0.0, lr = 0.0;
  int n_phone = 0, n_phrase = 0;

  void Add(const TrainLogRecord& r) {
    if (!std::isnan(r.phone_loss)) phone += r.phone_loss, ++n_phone;
    if (!std::isnan(r.phrase_loss)) phrase += r.phrase_loss, ++n_phrase;
    lr = r.lr;
  }
  double Phone() const { return n_phone ? phone / n_phone : std::nan(""); }
  double Phrase() const { return n_phrase ? phrase / n_phrase : std::nan(""); }
};

void PrintEpoch(std::ostream& out, const EpochMeans& m, int epochs) {
  out << "epoch " << (m.epoch + 1) << "/" << epochs << "  phone_loss " << Fixed(m.Phone())
      << "  phrase_loss " << Fixed(m.Phrase()) << "  lr " << Fixed(m.lr, 8) << '\n';
  out.flush();
}

int TrainCmd(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
             const std::string& resume, int stop_after, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset asr = ReadKind(data_dir / kAsrFile, DatasetKind::kAsr);
  Dataset kws;
  kws.kind = DatasetKind::kKws;
  if (cfg.train.mode != TrainMode::kPhonemeOnly) {
    kws = ReadKind(data_dir / kKwsTrainFile, DatasetKind::kKws);
  }
  EnsureDir(out_dir);

  TrainOptions opts;
  opts.checkpoint_dir = out_dir;
  int start_epoch = 0;
  if (!resume.empty()) {
    opts.resume = LoadCheckpoint(resume);
    start_epoch = static_cast<int>(opts.resume->counters.at("epoch"));
    out << "resuming from " << resume << " at epoch " << start_epoch << '\n';
  }
  if (stop_after > 0) opts.stop_after_epoch = stop_after;

  const fs::path log_path = out_dir / kLogFile;
  const std::vector<std::string> kept = KeptLogLines(log_path, start_epoch);
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  log << kTrainLogHeader << '\n';
  for (const std::string& line : kept) log << line << '\n';

  EpochMeans means;
  EpochMeans last;
  opts.on_batch = [&](const TrainLogRecord& r) {
    log << FormatLogRecord(r) << '\n';
    if (r.epoch != means.epoch) {
      if (means.epoch >= 0) PrintEpoch(out, means, cfg.train.epochs);
      log.flush();
      means = EpochMeans{};
      means.epoch = r.epoch;
    }
    means.Add(r);
  };
  const TrainResult result = Train(asr, kws, cfg.train, cfg.model, opts);
  if (means.epoch >= 0) PrintEpoch(out, means, cfg.train.epochs);
  log.close();
  if (!log) throw IoError("failed writing " + log_path.string());
  SaveCheckpoint(out_dir / kFinalCheckpoint, result.checkpoint);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "train: mode " << ToString(cfg.model.mode) << ", epochs "
      << result.checkpoint.counters.at("epoch") << "/" << cfg.train.epochs
      << ", final phone_loss " << Fixed(means.Phone()) << ", final phrase_loss "
      << Fixed(means.Phrase()) << ", wall time " << Fixed(wall, 1) << " s\n";
  return kExitOk;
}

int EvalCmd(RunConfig cfg, const fs::path& ckpt_path, const fs::path& eval_path,
            const fs::path& out_dir, const std::string& mode, std::ostream& out) {
  const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  if (!mode.empty() && ParseTrainMode(mode) != ckpt.config.mode) {
    throw ConfigError("checkpoint was trained as " + std::string(ToString(ckpt.config.mode)) +
                      ", not " + mode);
  }
  cfg.model = ckpt.config;
  cfg.train.mode = ckpt.config.mode;
  cfg.Validate();
  PrintConfig(out, cfg);

  const Dataset eval = ReadKind(eval_path, DatasetKind::kKws);
  if (eval.dim != ckpt.config.encoder.input_dim) {
    throw ConfigError("eval set dim " + std::to_string(eval.dim) +
                      " does not match checkpoint input_dim " +
                      std::to_string(ckpt.config.encoder.input_dim));
  }
  std::vector<Tensor> features;
  std::vector<bool> labels;
  for (const Utterance& u : eval.utterances) {
    if (!u.phrase) throw FormatError("eval utterance without a phrase label");
    features.push_back(u.features);
    labels.push_back(*u.phrase == PhraseLabel::kPositive);
  }
  EnsureDir(out_dir);
  const auto scores = ScoreBranches(ckpt.params, ckpt.config, features, labels,
                                    cfg.synth.keyword);
  const std::vector<Branch> branches = BranchesFor(ckpt.config.mode);
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const std::string name(ToString(branches[b]));
    const DetCurve curve = ComputeDetCurve(scores[b], cfg.eval.fa_denominator);
    WriteScores(out_dir / ("scores_" + name + ".txt"), scores[b]);
    WriteDetCurve(out_dir / ("det_" + name + ".txt"), curve);
    const OperatingPoint op = FrrAtFa(curve, cfg.eval.fa_target);
    out << "eval: branch " << name << ", frr " << Fixed(op.frr) << " at fa "
        << cfg.eval.fa_target << ", threshold " << Sci(op.threshold) << ", "
        << curve.positives << " positives, " << curve.negatives << " negatives\n";
  }
  return kExitOk;
}

int DetCmd(const RunConfig& cfg, const fs::path& scores_path, const std::string& out_path,
           std::ostream& out) {
  const std::vector<ScoredTrial> trials = ReadScores(scores_path);
  const DetCurve curve = ComputeDetCurve(trials, cfg.eval.fa_denominator);
  if (out_path.empty()) {
    WriteDetCurve(out, curve);
  } else {
    WriteDetCurve(fs::path(out_path), curve);
  }
  const OperatingPoint op = FrrAtFa(curve, cfg.eval.fa_target);
  out << "det: frr " << Fixed(op.frr) << " at fa " << cfg.eval.fa_target << ", threshold "
      << Sci(op.threshold) << ", " << curve.positives << " positives, " << curve.negatives
      << " negatives\n";
  return kExitOk;
}

int GradCheckCmd(const std::string& scope, int seeds, bool inject_fault, std::ostream& out) {
  std::vector<gradcheck::Case> cases = gradcheck::CasesForScope(scope);
  if (inject_fault) cases.push_back(gradcheck::FaultyCase());
  gradcheck::Options opts;
  opts.seeds = seeds;
  int failed = 0;
  double worst = 0.0;
  for (const gradcheck::Case& c : cases) {
    const gradcheck::CaseResult r = gradcheck::Check(c, opts);
    char line[160];
    std::snprintf(line, sizeof(line), "%-36s %-7s seeds %3d  max_rel_error %.3e  %s\n",
                  r.name.c_str(), r.scope.c_str(), r.seeds, r.max_rel_error,
                  r.passed ? "ok" : "FAIL");
    out << line;
    out.flush();
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed) ++failed;
  }
  out << "grad-check: scope " << scope << ", " << cases.size() << " cases, " << failed
      << " failed, max rel error " << Sci(worst) << ", tolerance " << Sci(opts.tolerance)
      << '\n';
  return failed == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyword spotting with a cross-attention phrase decoder", "kws"};
  app.require_subcommand(1);

  ConfigFlags gen_flags;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "Write asr.bin, kws_train.bin, kws_eval.bin");
  AddConfigFlags(gen, &gen_flags);
  gen->add_option("--out", gen_out, "Output directory")->required();

  ConfigFlags train_flags;
  std::string train_data, train_out, train_resume;
  int stop_after = 0;
  CLI::App* train = app.add_subcommand("train", "Train the configured mode");
  AddConfigFlags(train, &train_flags);
  AddThreadsFlag(train, &train_flags);
  train->add_option("--data", train_data, "Directory written by gen-data")->required();
  train->add_option("--out", train_out, "Directory for checkpoints and train_log.tsv")
      ->required();
  train->add_option("--resume", train_resume, "Epoch checkpoint to continue from");
  train->add_option("--stop-after-epoch", stop_after, "Stop once this many epochs are done")
      ->check(CLI::PositiveNumber);

  ConfigFlags eval_flags;
  std::string eval_ckpt, eval_set, eval_out, eval_mode;
  std::optional<double> eval_fa;
  CLI::App* eval = app.add_subcommand("eval", "Score an eval set and write DET curves");
  AddConfigFlags(eval, &eval_flags);
  eval->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required();
  eval->add_option("--eval-set", eval_set, "KWS eval dataset (kws_eval.bin)")->required();
  eval->add_option("--out", eval_out, "Directory for det_*.txt and scores_*.txt")->required();
  eval->add_option("--mode", eval_mode, "Expected training mode of the checkpoint");
  eval->add_option("--fa-target", eval_fa, "FA operating point (overrides eval.fa_target)");

  ConfigFlags det_flags;
  std::string det_scores, det_out;
  std::optional<double> det_fa;
  CLI::App* det = app.add_subcommand("det", "Re-derive a DET curve from a score file");
  AddConfigFlags(det, &det_flags);
  det->add_option("--scores", det_scores, "Score file written by eval")->required();
  det->add_option("--out", det_out, "DET output file (default: stdout)");
  det->add_option("--fa-target", det_fa, "FA operating point (overrides eval.fa_target)");

  std::string scope = "all";
  int seeds = gradcheck::Options{}.seeds;
  bool inject_fault = false;
  CLI::App* grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  grad->add_option("--scope", scope, "ops, losses, model or all")
      ->check(CLI::IsMember({"ops", "losses", "model", "all"}));
  grad->add_option("--seeds", seeds, "Random draws per case")->check(CLI::PositiveNumber);
  grad->add_flag("--inject-fault", inject_fault)->group("");

  std::vector<const char*> argv{"kws"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = ResolveConfig(gen_flags);
      PrintConfig(out, cfg);
      return GenData(cfg, gen_out, out);
    }
    if (train->parsed()) {
      const RunConfig cfg = ResolveConfig(train_flags);
      PrintConfig(out, cfg);
      return TrainCmd(cfg, train_data, train_out, train_resume, stop_after, out);
    }
    if (eval->parsed()) {
      RunConfig cfg = ResolveConfig(eval_flags);
      if (eval_fa) cfg.eval.fa_target = *eval_fa;
      return EvalCmd(cfg, eval_ckpt, eval_set, eval_out, eval_mode, out);
    }
    if (det->parsed()) {
      RunConfig cfg = ResolveConfig(det_flags);
      if (det_fa) cfg.eval.fa_target = *det_fa;
      cfg.Validate();
      PrintConfig(out, cfg);
      return DetCmd(cfg, det_scores, det_out, out);
    }
    return GradCheckCmd(scope, seeds, inject_fault, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace kws::cli
