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

#include "kws/trainer.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "kws/errors.h"
#include "kws/losses.h"

namespace kws {
namespace {

constexpr std::uint64_t kAsrOrderStream = 101;
constexpr std::uint64_t kKwsOrderStream = 102;

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

struct BatchItem {
  const Utterance* utt;
  DatasetKind kind;
  double weight;
};

struct ItemResult {
  double loss = 0.0;
  GradMap grads;
};

ItemResult RunItem(const ModelParams& params, const ModelConfig& model_cfg,
                   const BatchItem& item) {
  ad::Tape tape;
  BoundParams bound(tape, params);
  ad::Var loss = UtteranceLoss(bound, model_cfg, *item.utt, item.kind);
  tape.Backward(ad::Scale(loss, item.weight));
  return {loss.value()[0], bound.Gradients()};
}

std::string Provenance(const TrainConfig& cfg, int epoch, std::size_t batch) {
  return "seed " + std::to_string(cfg.seed) + ", epoch " + std::to_string(epoch) +
         ", batch " + std::to_string(batch);
}

}  // namespace

void TrainConfig::Validate() const {
  Require(batch_size >= 1, "batch_size must be >= 1");
  Require(kws_fraction >= 0.0 && kws_fraction <= 1.0, "kws_fraction must be in [0, 1]");
  Require(lr_peak > 0.0 && lr_mid > 0.0, "learning rates must be positive");
  Require(warmup_epochs > 0.0 && warmup_epochs < mid_epoch && mid_epoch < epochs,
          "schedule needs 0 < warmup_epochs < mid_epoch < epochs");
  Require(final_decay >= 0.0 && final_decay <= 1.0, "final_decay must be in [0, 1]");
  Require(alpha >= 0.0, "alpha must be >= 0");
  Require(clip_norm > 0.0, "clip_norm must be positive");
  Require(threads >= 1, "threads must be >= 1");
}

double TrainConfig::DecayRate() const {
  if (final_decay > 0.0) return final_decay;
  return std::pow(0.25, 1.0 / (static_cast<double>(epochs) - mid_epoch));
}

int TrainConfig::KwsPerBatch() const {
  if (mode == TrainMode::kPhonemeOnly) return 0;
  return static_cast<int>(std::lround(batch_size * kws_fraction));
}

double LrAt(double epoch_fraction, const TrainConfig& cfg) {
  const double t = epoch_fraction;
  if (t <= cfg.warmup_epochs) return cfg.lr_peak * t / cfg.warmup_epochs;
  if (t <= cfg.mid_epoch) {
    const double u = (t - cfg.warmup_epochs) / (cfg.mid_epoch - cfg.warmup_epochs);
    // Weighted form so both knots are hit exactly.
    return cfg.lr_peak * (1.0 - u) + cfg.lr_mid * u;
  }
  return cfg.lr_mid * std::pow(cfg.DecayRate(), t - cfg.mid_epoch);
}

void AdamStep(ModelParams& params, const GradMap& grads, AdamState& state, double lr) {
  for (const auto& [name, g] : grads) {
    for (double v : g.data()) {
      if (std::isnan(v)) throw NumericalError("NaN gradient for parameter '" + name + "'");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& [name, value] : params.tensors()) {
    Tensor& p = params.Mutable(name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor(p.shape())).first;
      state.v.emplace(name, Tensor(p.shape()));
    }
    Tensor& m = mit->second;
    Tensor& v = state.v.find(name)->second;
    auto git = grads.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = git == grads.end() ? 0.0 : git->second[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double ClipGlobalNorm(GradMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, g] : grads)
      for (double& v : g.data()) v *= s;
  }
  return norm;
}

BatchSampler::BatchSampler(std::size_t n_asr, std::size_t n_kws, const TrainConfig& cfg)
    : n_asr_(n_asr), n_kws_(n_kws), seed_(cfg.seed) {
  const auto n = static_cast<std::size_t>(cfg.batch_size);
  kws_per_batch_ = static_cast<std::size_t>(cfg.KwsPerBatch());
  asr_per_batch_ = n - kws_per_batch_;
  if (kws_per_batch_ > 0 && n_kws_ == 0) {
    throw ConfigError("kws_fraction > 0 but the KWS dataset is empty");
  }
  if (asr_per_batch_ > 0 && n_asr_ == 0) {
    throw ConfigError("batches need ASR utterances but the ASR dataset is empty");
  }
  if (asr_per_batch_ > 0) {
    batches_per_epoch_ = (n_asr_ + asr_per_batch_ - 1) / asr_per_batch_;
  } else {
    batches_per_epoch_ = (n_kws_ + kws_per_batch_ - 1) / kws_per_batch_;
  }
}

std::vector<std::size_t> BatchSampler::Permutation(std::uint64_t stream, std::uint64_t pass,
                                                   std::size_t n) const {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = DerivedRng(seed_, stream, pass);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

BatchSampler::Batch BatchSampler::Get(int epoch, std::size_t batch) const {
  Batch out;
  if (asr_per_batch_ > 0) {
    const auto perm = Permutation(kAsrOrderStream, static_cast<std::uint64_t>(epoch), n_asr_);
    const std::size_t begin = batch * asr_per_batch_;
    const std::size_t end = std::min(n_asr_, begin + asr_per_batch_);
    for (std::size_t i = begin; i < end; ++i) out.asr.push_back(perm[i]);
  }
  if (kws_per_batch_ > 0) {
    const std::uint64_t first =
        (static_cast<std::uint64_t>(epoch) * batches_per_epoch_ + batch) * kws_per_batch_;
    std::uint64_t cached_pass = ~std::uint64_t{0};
    std::vector<std::size_t> perm;
    for (std::uint64_t g = first; g < first + kws_per_batch_; ++g) {
      const std::uint64_t pass = g / n_kws_;
      if (pass != cached_pass) {
        perm = Permutation(kKwsOrderStream, pass, n_kws_);
        cached_pass = pass;
      }
      out.kws.push_back(perm[g % n_kws_]);
    }
  }
  return out;
}

std::string FormatLogRecord(const TrainLogRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.epoch << '\t' << r.batch << '\t';
  auto put = [&os](double v) {
    if (std::isnan(v)) {
      os << '-';
    } else {
      os << v;
    }
  };
  put(r.phone_loss);
  os << '\t';
  put(r.phrase_loss);
  os << '\t' << r.lr;
  return os.str();
}

ad::Var UtteranceLoss(BoundParams& p, const ModelConfig& cfg, const Utterance& utt,
                      DatasetKind kind) {
  ad::Var x = p.tape().Constant(utt.features);
  const EncoderOutput enc = Encode(p, x, cfg.encoder);
  if (kind == DatasetKind::kAsr) {
    return CtcLoss(enc.phone_logits, utt.phones, cfg.encoder.n_phone_logits - 1);
  }
  if (!utt.phrase) throw ShapeError("KWS utterance without phrase label");
  ad::Var head = PhraseHead(p, enc, cfg);
  if (cfg.mode == TrainMode::kConvMtl) return PhraseCtcLoss(head, *utt.phrase);
  return PhraseCeLoss(head, *utt.phrase);
}

void StoreAdamState(const AdamState& state, Checkpoint& ckpt) {
  for (const auto& [name, t] : state.m) ckpt.extra.Set("adam.m/" + name, t);
  for (const auto& [name, t] : state.v) ckpt.extra.Set("adam.v/" + name, t);
  ckpt.counters["adam_step"] = state.step;
}

AdamState LoadAdamState(const Checkpoint& ckpt) {
  AdamState state;
  auto it = ckpt.counters.find("adam_step");
  state.step = it == ckpt.counters.end() ? 0 : it->second;
  for (const auto& [name, t] : ckpt.extra.tensors()) {
    if (name.starts_with("adam.m/")) state.m.emplace(name.substr(7), t);
    if (name.starts_with("adam.v/")) state.v.emplace(name.substr(7), t);
  }
  for (const auto& [name, t] : state.m) {
    if (!ckpt.params.Contains(name) || ckpt.params.Get(name).shape() != t.shape() ||
        !state.v.contains(name)) {
      throw FormatError("checkpoint: optimizer state for '" + name + "' does not match");
    }
  }
  return state;
}

TrainResult Train(const Dataset& asr, const Dataset& kws, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const TrainOptions& opts) {
  cfg.Validate();
  model_cfg.Validate();
  if (cfg.mode != model_cfg.mode) throw ConfigError("train and model modes differ");
  const bool use_kws = cfg.KwsPerBatch() > 0;
  for (const Dataset* ds : {&asr, &kws}) {
    if (ds == &kws && !use_kws) continue;
    if (!ds->utterances.empty() && ds->dim != model_cfg.encoder.input_dim) {
      throw ShapeError("dataset feature dim " + std::to_string(ds->dim) +
                       " does not match model input_dim " +
                       std::to_string(model_cfg.encoder.input_dim));
    }
  }
  if (!asr.utterances.empty() && asr.kind != DatasetKind::kAsr) {
    throw ConfigError("ASR dataset has the wrong kind");
  }
  if (use_kws && kws.kind != DatasetKind::kKws) throw ConfigError("KWS dataset has the wrong kind");

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  AdamState adam;
  int start_epoch = 0;
  if (opts.resume) {
    ckpt = *opts.resume;
    if (ckpt.config != model_cfg) throw ConfigError("resume checkpoint config differs");
    adam = LoadAdamState(ckpt);
    start_epoch = static_cast<int>(ckpt.counters.at("epoch"));
  } else {
    ckpt.config = model_cfg;
    ckpt.params = InitParams(model_cfg, cfg.seed);
  }
  const int stop_epoch = opts.stop_after_epoch.value_or(cfg.epochs);
  if (stop_epoch > cfg.epochs) throw ConfigError("stop_after_epoch exceeds epochs");

  const BatchSampler sampler(asr.size(), use_kws ? kws.size() : 0, cfg);
  const std::size_t n_batches = sampler.batches_per_epoch();

  for (int epoch = start_epoch; epoch < stop_epoch; ++epoch) {
    for (std::size_t b = 0; b < n_batches; ++b) {
      const BatchSampler::Batch batch = sampler.Get(epoch, b);
      std::vector<BatchItem> items;
      // Per-utterance weights reproduce mean(asr) + alpha * mean(kws).
      for (std::size_t i : batch.asr) {
        items.push_back({&asr.utterances[i], DatasetKind::kAsr, 1.0 / batch.asr.size()});
      }
      for (std::size_t i : batch.kws) {
        items.push_back({&kws.utterances[i], DatasetKind::kKws, cfg.alpha / batch.kws.size()});
      }

      std::vector<ItemResult> results(items.size());
      try {
        const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads),
                                                   items.size());
        if (workers <= 1) {
          for (std::size_t i = 0; i < items.size(); ++i) {
            results[i] = RunItem(ckpt.params, model_cfg, items[i]);
          }
        } else {
          std::vector<std::thread> pool;
          std::vector<std::exception_ptr> errors(workers);
          for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
              try {
                for (std::size_t i = w; i < items.size(); i += workers) {
                  results[i] = RunItem(ckpt.params, model_cfg, items[i]);
                }
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          }
          for (auto& t : pool) t.join();
          for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        }

        // Reduce in item order so the sum does not depend on the thread count.
        GradMap total;
        for (const auto& [name, t] : ckpt.params.tensors()) total.emplace(name, Tensor(t.shape()));
        double phone_sum = 0.0, phrase_sum = 0.0;
        for (std::size_t i = 0; i < items.size(); ++i) {
          (items[i].kind == DatasetKind::kAsr ? phone_sum : phrase_sum) += results[i].loss;
          for (const auto& [name, g] : results[i].grads) {
            Tensor& dst = total.find(name)->second;
            for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
          }
        }
        results.clear();
        ClipGlobalNorm(total, cfg.clip_norm);
        const double lr =
            LrAt(epoch + static_cast<double>(b) / static_cast<double>(n_batches), cfg);
        AdamStep(ckpt.params, total, adam, lr);

        TrainLogRecord rec;
        rec.epoch = epoch;
        rec.batch = b;
        rec.phone_loss = batch.asr.empty() ? std::nan("") : phone_sum / batch.asr.size();
        rec.phrase_loss = batch.kws.empty() ? std::nan("") : phrase_sum / batch.kws.size();
        rec.lr = lr;
        result.log.push_back(rec);
        if (opts.on_batch) opts.on_batch(rec);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (" + Provenance(cfg, epoch, b) + ")");
      }
    }
    ckpt.counters["epoch"] = epoch + 1;
    StoreAdamState(adam, ckpt);
    if (opts.checkpoint_dir) {
      std::ostringstream name;
      name << "epoch_" << std::setw(3) << std::setfill('0') << (epoch + 1) << ".ckpt";
      SaveCheckpoint(*opts.checkpoint_dir / name.str(), ckpt);
    }
  }
  if (!ckpt.counters.contains("epoch")) ckpt.counters["epoch"] = start_epoch;
  return result;
}

}  // namespace kws
