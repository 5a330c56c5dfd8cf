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

#include "kws/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "kws/binary_io.h"
#include "kws/errors.h"

namespace kws {
namespace {

std::size_t NextPow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void Fft(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ShapeError("fft size " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w(std::cos(ang * static_cast<double>(k)),
                                     std::sin(ang * static_cast<double>(k)));
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
      }
    }
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelCenterFrequencies(const LogMelConfig& cfg) {
  const double lo = HzToMel(cfg.low_hz), hi = HzToMel(cfg.high_hz);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[m] = MelToHz(lo + (hi - lo) * (m + 1) / (cfg.n_mels + 1));
  }
  return centers;
}

FeatureSequence LogMel(const Waveform& wave, const LogMelConfig& cfg) {
  if (wave.sample_rate <= 0) throw ShapeError("sample rate must be positive");
  if (cfg.n_mels < 1) throw ConfigError("n_mels must be positive");
  const auto win = static_cast<std::size_t>(std::lround(cfg.window_seconds * wave.sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_seconds * wave.sample_rate));
  if (win == 0 || hop == 0) throw ConfigError("window and hop must be at least one sample");
  if (wave.samples.size() < win) {
    throw ShapeError("audio of " + std::to_string(wave.samples.size()) +
                     " samples is shorter than one " + std::to_string(win) + "-sample window");
  }
  const std::size_t frames = 1 + (wave.samples.size() - win) / hop;
  const std::size_t nfft = NextPow2(win);
  const std::size_t bins = nfft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(win - 1));
  }

  // Triangular filters over bin frequencies, edges evenly spaced in mel.
  const double lo = HzToMel(cfg.low_hz), hi = HzToMel(cfg.high_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int m = 0; m < cfg.n_mels + 2; ++m) {
    edges[m] = MelToHz(lo + (hi - lo) * m / (cfg.n_mels + 1));
  }
  Tensor fbank({static_cast<std::size_t>(cfg.n_mels), bins});
  for (int m = 0; m < cfg.n_mels; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * wave.sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f > edges[m] && f <= edges[m + 1]) {
        w = (f - edges[m]) / (edges[m + 1] - edges[m]);
      } else if (f > edges[m + 1] && f < edges[m + 2]) {
        w = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      }
      fbank.at(m, k) = w;
    }
  }

  FeatureSequence out;
  out.frames = Tensor({frames, static_cast<std::size_t>(cfg.n_mels)});
  out.frame_shift_seconds = static_cast<double>(hop) / wave.sample_rate;
  std::vector<double> buf(win);
  std::vector<std::complex<double>> spec(nfft);
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::int16_t* src = wave.samples.data() + t * hop;
    for (std::size_t i = 0; i < win; ++i) buf[i] = src[i];
    for (std::size_t i = win - 1; i > 0; --i) buf[i] -= cfg.preemphasis * buf[i - 1];
    buf[0] -= cfg.preemphasis * buf[0];
    std::fill(spec.begin(), spec.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < win; ++i) spec[i] = buf[i] * window[i];
    Fft(spec);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spec[k]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      auto w = fbank.row(m);
      for (std::size_t k = 0; k < bins; ++k) e += w[k] * power[k];
      out.frames.at(t, m) = std::log(std::max(e, cfg.energy_floor));
    }
  }
  return out;
}

FeatureSequence StackContext(const FeatureSequence& in, int left, int right) {
  const std::size_t T = in.num_frames(), D = in.dim();
  if (T == 0) throw ShapeError("stack_context: empty sequence");
  const auto span = static_cast<std::size_t>(left + 1 + right);
  FeatureSequence out;
  out.frame_shift_seconds = in.frame_shift_seconds;
  out.frames = Tensor({T, D * span});
  for (std::size_t t = 0; t < T; ++t) {
    for (int o = -left; o <= right; ++o) {
      const auto src = static_cast<std::size_t>(
          std::clamp<long>(static_cast<long>(t) + o, 0, static_cast<long>(T) - 1));
      auto from = in.frames.row(src);
      std::copy(from.begin(), from.end(),
                out.frames.row(t).begin() + static_cast<long>((o + left) * D));
    }
  }
  return out;
}

FeatureSequence Subsample(const FeatureSequence& in, int factor, int phase) {
  if (factor < 1 || phase < 0 || phase >= factor) {
    throw ConfigError("subsample: need factor >= 1 and 0 <= phase < factor");
  }
  const std::size_t T = in.num_frames(), D = in.dim();
  if (T <= static_cast<std::size_t>(phase)) throw ShapeError("subsample: too few frames");
  const std::size_t kept = (T - phase + factor - 1) / factor;
  FeatureSequence out;
  out.frame_shift_seconds = in.frame_shift_seconds * factor;
  out.frames = Tensor({kept, D});
  for (std::size_t i = 0; i < kept; ++i) {
    auto from = in.frames.row(phase + i * factor);
    std::copy(from.begin(), from.end(), out.frames.row(i).begin());
  }
  return out;
}

void MeanNormalize(FeatureSequence& seq) {
  const std::size_t T = seq.num_frames(), D = seq.dim();
  for (std::size_t d = 0; d < D; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += seq.frames.at(t, d);
    mean /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) seq.frames.at(t, d) -= mean;
  }
}

FeatureSequence ComputeFeatures(const Waveform& wave, const FrontendConfig& cfg) {
  FeatureSequence seq = LogMel(wave, cfg.mel);
  if (cfg.mean_normalize) MeanNormalize(seq);
  seq = StackContext(seq, cfg.context_left, cfg.context_right);
  return Subsample(seq, cfg.subsample_factor, cfg.subsample_phase);
}

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  io::ExpectMagic(is, "RIFF");
  io::ReadUInt<std::uint32_t>(is);
  io::ExpectMagic(is, "WAVE");
  Waveform wave;
  bool have_fmt = false;
  while (true) {
    char id[4];
    if (!is.read(id, 4)) throw FormatError("wav: no data chunk");
    const auto size = io::ReadUInt<std::uint32_t>(is);
    const std::string chunk(id, 4);
    if (chunk == "fmt ") {
      if (size < 16) throw FormatError("wav: short fmt chunk");
      const auto format = io::ReadUInt<std::uint16_t>(is);
      const auto channels = io::ReadUInt<std::uint16_t>(is);
      wave.sample_rate = static_cast<int>(io::ReadUInt<std::uint32_t>(is));
      io::ReadUInt<std::uint32_t>(is);
      io::ReadUInt<std::uint16_t>(is);
      const auto bits = io::ReadUInt<std::uint16_t>(is);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("wav: only PCM 16-bit mono is supported");
      }
      is.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      wave.samples.resize(size / 2);
      for (auto& s : wave.samples) s = static_cast<std::int16_t>(io::ReadUInt<std::uint16_t>(is));
      break;
    } else {
      is.ignore(size + (size & 1));
    }
  }
  if (wave.samples.empty()) throw FormatError("wav: no samples");
  return wave;
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  os.write("RIFF", 4);
  io::WriteUInt<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  io::WriteUInt<std::uint32_t>(os, 16);
  io::WriteUInt<std::uint16_t>(os, 1);
  io::WriteUInt<std::uint16_t>(os, 1);
  io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate));
  io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate * 2));
  io::WriteUInt<std::uint16_t>(os, 2);
  io::WriteUInt<std::uint16_t>(os, 16);
  os.write("data", 4);
  io::WriteUInt<std::uint32_t>(os, data_bytes);
  for (std::int16_t s : wave.samples) io::WriteUInt<std::uint16_t>(os, static_cast<std::uint16_t>(s));
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace kws
