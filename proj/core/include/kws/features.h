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

// Audio frontend: log-mel filterbank frames, context stacking, frame
// subsampling, and PCM16 WAV I/O.

#ifndef KWS_FEATURES_H_
#define KWS_FEATURES_H_

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "kws/tensor.h"

namespace kws {

struct Waveform {
  std::vector<std::int16_t> samples;
  int sample_rate = 16000;
};

struct FeatureSequence {
  Tensor frames;  // T x D
  double frame_shift_seconds = 0.0;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct LogMelConfig {
  int n_mels = 40;
  double window_seconds = 0.025;
  double hop_seconds = 0.010;
  double preemphasis = 0.97;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double energy_floor = 1e-10;
};

struct FrontendConfig {
  LogMelConfig mel;
  int context_left = 3;
  int context_right = 3;
  int subsample_factor = 3;
  int subsample_phase = 0;
  bool mean_normalize = true;

  int output_dim() const { return mel.n_mels * (context_left + 1 + context_right); }
};

// In-place radix-2 FFT; size must be a power of two.
void Fft(std::vector<std::complex<double>>& x);

double HzToMel(double hz);
double MelToHz(double mel);

// Center frequency of each triangular filter, in Hz.
std::vector<double> MelCenterFrequencies(const LogMelConfig& cfg);

// Per frame: pre-emphasis, Hann window, power spectrum on the window
// zero-padded to the next power of two, triangular mel filters, natural log
// with an energy floor. T = 1 + floor((len - win) / hop).
FeatureSequence LogMel(const Waveform& wave, const LogMelConfig& cfg = {});

// Frame t becomes frames[t-left .. t+right] concatenated, edges replicated.
FeatureSequence StackContext(const FeatureSequence& in, int left = 3, int right = 3);

// Keeps frames phase, phase + factor, ...; frame shift scales by `factor`.
FeatureSequence Subsample(const FeatureSequence& in, int factor = 3, int phase = 0);

// Subtracts the per-utterance mean of every dimension.
void MeanNormalize(FeatureSequence& seq);

// LogMel -> MeanNormalize -> StackContext -> Subsample.
FeatureSequence ComputeFeatures(const Waveform& wave, const FrontendConfig& cfg = {});

// RIFF/WAVE, PCM 16-bit mono only.
Waveform ReadWav(const std::filesystem::path& path);
void WriteWav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace kws

#endif  // KWS_FEATURES_H_
