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

// Mixed ASR/KWS mini-batch training with Adam.

#ifndef KWS_TRAINER_H_
#define KWS_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kws/data.h"
#include "kws/model.h"

namespace kws {

using GradMap = std::map<std::string, Tensor, std::less<>>;

struct TrainConfig {
  int batch_size = 32;
  double kws_fraction = 0.25;
  int epochs = 28;
  double lr_peak = 0.0008;
  double lr_mid = 0.00056;
  double warmup_epochs = 2.0;
  double mid_epoch = 16.0;
  // Per-epoch factor after mid_epoch; 0 picks the rate that ends at lr_mid/4.
  double final_decay = 0.0;
  double alpha = 10.0;
  double clip_norm = 5.0;
  TrainMode mode = TrainMode::kXattnMtl;
  std::uint64_t seed = 1;
  int threads = 1;

  void Validate() const;
  double DecayRate() const;
  // J per batch; 0 in phoneme-only mode.
  int KwsPerBatch() const;
};

double LrAt(double epoch_fraction, const TrainConfig& cfg);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  GradMap m;
  GradMap v;
};

// Bias-corrected Adam. Parameters absent from `grads` see a zero gradient.
// Throws NumericalError on a NaN gradient.
void AdamStep(ModelParams& params, const GradMap& grads, AdamState& state, double lr);

// Rescales `grads` in place so the global L2 norm is at most `max_norm`;
// returns the norm before clipping.
double ClipGlobalNorm(GradMap& grads, double max_norm);

// Stratified mini-batches. Every batch holds J = round(N * kws_fraction) KWS
// utterances and up to N - J ASR utterances. An epoch is one pass over the
// ASR set in a fresh permutation; the KWS set is consumed as an endless
// stream of reshuffled passes. Batches are a pure function of
// (seed, epoch, batch index).
class BatchSampler {
 public:
  struct Batch {
    std::vector<std::size_t> asr;
    std::vector<std::size_t> kws;
  };

  BatchSampler(std::size_t n_asr, std::size_t n_kws, const TrainConfig& cfg);

  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  Batch Get(int epoch, std::size_t batch) const;

 private:
  std::vector<std::size_t> Permutation(std::uint64_t stream, std::uint64_t pass,
                                       std::size_t n) const;

  std::size_t n_asr_;
  std::size_t n_kws_;
  std::size_t asr_per_batch_;
  std::size_t kws_per_batch_;
  std::size_t batches_per_epoch_;
  std::uint64_t seed_;
};

struct TrainLogRecord {
  int epoch = 0;
  std::size_t batch = 0;
  double phone_loss = 0.0;   // NaN when the batch held no ASR utterance
  double phrase_loss = 0.0;  // NaN when the batch held no KWS utterance
  double lr = 0.0;
  friend bool operator==(const TrainLogRecord&, const TrainLogRecord&) = default;
};

std::string FormatLogRecord(const TrainLogRecord& r);
inline constexpr const char* kTrainLogHeader = "# epoch\tbatch\tphone_loss\tphrase_loss\tlr";

struct TrainOptions {
  // When set, epoch checkpoints are written here as epoch_NNN.ckpt.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Resume from this checkpoint (params, Adam moments, epoch counter).
  std::optional<Checkpoint> resume;
  // Train until this many epochs are complete; defaults to cfg.epochs.
  std::optional<int> stop_after_epoch;
  std::function<void(const TrainLogRecord&)> on_batch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRecord> log;
};

// Loss of one utterance for the configured mode: phone CTC for ASR
// utterances, phrase CTC (conv_mtl) or phrase cross entropy otherwise.
ad::Var UtteranceLoss(BoundParams& p, const ModelConfig& cfg, const Utterance& utt,
                      DatasetKind kind);

TrainResult Train(const Dataset& asr, const Dataset& kws, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const TrainOptions& opts = {});

// Checkpoint <-> optimizer state.
void StoreAdamState(const AdamState& state, Checkpoint& ckpt);
AdamState LoadAdamState(const Checkpoint& ckpt);

}  // namespace kws

#endif  // KWS_TRAINER_H_
