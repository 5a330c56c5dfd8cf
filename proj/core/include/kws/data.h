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

// Synthetic ASR/KWS corpora and the dataset file format.
//
// Every phone owns a prototype feature vector drawn once from the seed.
// Utterances render each phone as a run of noisy copies of its prototype.
// KWS utterances additionally pass through a fixed random "channel" (a
// near-identity linear mix) so that the KWS domain differs from the ASR
// domain the way far-field device audio differs from transcribed speech.

#ifndef KWS_DATA_H_
#define KWS_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "kws/features.h"
#include "kws/losses.h"
#include "kws/tensor.h"

namespace kws {

struct SynthConfig {
  int n_phones = kNumPhones;
  std::vector<int> keyword = {7, 21, 3, 40, 12, 30};
  int n_asr_utts = 800;
  int n_kws_pos = 200;
  int n_kws_neg = 200;
  int n_eval_pos = 200;
  int n_eval_neg = 400;
  double noise_std = 0.1;
  double prototype_scale = 1.0;
  double confusable_rate = 0.5;
  double kws_channel_shift = 0.0;  // 0 = KWS and ASR domains identical
  int feature_dim = 280;
  int min_phone_frames = 4;
  int max_phone_frames = 8;
  int min_asr_phones = 3;
  int max_asr_phones = 12;
  int max_context_phones = 5;
  bool render_audio = false;
  std::uint64_t seed = 1;

  void Validate() const;
};

enum class DatasetKind : std::uint8_t { kAsr = 0, kKws = 1 };
enum class KwsSplit { kTrain, kEval };
enum class Domain { kAsr, kKws };

struct Utterance {
  Tensor features;                    // T' x D
  std::vector<int> phones;            // ASR label sequence
  std::optional<PhraseLabel> phrase;  // KWS label

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dataset {
  DatasetKind kind = DatasetKind::kAsr;
  std::uint64_t seed = 0;
  int dim = 0;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  std::size_t CountLabel(PhraseLabel label) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Renders phone runs into feature frames. Holds the prototype bank and the
// KWS channel, both pure functions of the config seed.
class PhoneRenderer {
 public:
  explicit PhoneRenderer(const SynthConfig& cfg);

  const Tensor& prototypes() const { return prototypes_; }
  const Tensor& channel() const { return channel_; }

  // durations[i] frames of phone phones[i]; noise drawn from `rng`.
  Tensor Render(std::span<const int> phones, std::span<const int> durations, Domain domain,
                std::mt19937_64& rng) const;

  // Tone-complex audio for the phones, sized so the frontend yields roughly
  // one output frame per duration unit.
  Waveform RenderAudio(std::span<const int> phones, std::span<const int> durations,
                       std::mt19937_64& rng) const;

 private:
  SynthConfig cfg_;
  Tensor prototypes_;  // n_phones x D
  Tensor channel_;     // D x D
};

// Deterministic per-item generator for (seed, stream, index).
std::mt19937_64 DerivedRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

Dataset SynthAsr(const SynthConfig& cfg);
Dataset SynthKws(const SynthConfig& cfg, KwsSplit split = KwsSplit::kTrain);

inline constexpr std::uint32_t kDatasetVersion = 1;

void WriteDataset(const std::filesystem::path& path, const Dataset& ds);
Dataset ReadDataset(const std::filesystem::path& path);

}  // namespace kws

#endif  // KWS_DATA_H_
