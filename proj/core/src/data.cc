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

#include "kws/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "kws/binary_io.h"
#include "kws/errors.h"

namespace kws {
namespace {

enum Stream : std::uint64_t {
  kPrototypeStream = 1,
  kChannelStream = 2,
  kAsrStream = 3,
  kKwsTrainStream = 4,
  kKwsEvalStream = 5,
  kToneStream = 6,
};

int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<int> RandomPhones(std::mt19937_64& rng, int n, int n_phones) {
  std::vector<int> out(n);
  for (int& p : out) p = UniformInt(rng, 0, n_phones - 1);
  return out;
}

// Audio frontend output frames per duration unit: 3 hops of 10 ms.
constexpr int kSamplesPerUnit = 480;

}  // namespace

void SynthConfig::Validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  req(n_phones >= 2 && n_phones <= kNumPhones, "n_phones must be in [2, 53]");
  req(!keyword.empty(), "keyword must not be empty");
  for (int k : keyword) req(k >= 0 && k < n_phones, "keyword phone id out of range");
  req(n_asr_utts >= 0 && n_kws_pos >= 0 && n_kws_neg >= 0 && n_eval_pos >= 0 &&
          n_eval_neg >= 0,
      "utterance counts must be >= 0");
  req(noise_std >= 0.0, "noise_std must be >= 0");
  req(prototype_scale > 0.0, "prototype_scale must be > 0");
  req(confusable_rate >= 0.0 && confusable_rate <= 1.0, "confusable_rate must be in [0, 1]");
  req(kws_channel_shift >= 0.0, "kws_channel_shift must be >= 0");
  req(feature_dim > 0, "feature_dim must be positive");
  req(min_phone_frames >= 1 && max_phone_frames >= min_phone_frames,
      "phone frame range invalid");
  req(min_asr_phones >= 1 && max_asr_phones >= min_asr_phones, "asr phone range invalid");
  req(max_context_phones >= 0, "max_context_phones must be >= 0");
  if (render_audio) {
    req(feature_dim == FrontendConfig{}.output_dim(),
        "render_audio requires feature_dim to match the frontend (280)");
  }
}

std::size_t Dataset::CountLabel(PhraseLabel label) const {
  return static_cast<std::size_t>(std::count_if(
      utterances.begin(), utterances.end(),
      [label](const Utterance& u) { return u.phrase == label; }));
}

std::mt19937_64 DerivedRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

PhoneRenderer::PhoneRenderer(const SynthConfig& cfg) : cfg_(cfg) {
  cfg.Validate();
  const auto D = static_cast<std::size_t>(cfg.feature_dim);
  prototypes_ = Tensor({static_cast<std::size_t>(cfg.n_phones), D});
  {
    auto rng = DerivedRng(cfg.seed, kPrototypeStream, 0);
    std::normal_distribution<double> normal(0.0, cfg.prototype_scale);
    for (double& v : prototypes_.data()) v = normal(rng);
  }
  channel_ = Tensor({D, D});
  {
    auto rng = DerivedRng(cfg.seed, kChannelStream, 0);
    std::normal_distribution<double> normal(0.0, cfg.kws_channel_shift /
                                                     std::sqrt(static_cast<double>(D)));
    for (std::size_t i = 0; i < D; ++i) {
      for (std::size_t j = 0; j < D; ++j) {
        channel_.at(i, j) = (i == j ? 1.0 : 0.0) + (cfg.kws_channel_shift > 0 ? normal(rng) : 0.0);
      }
    }
  }
}

Tensor PhoneRenderer::Render(std::span<const int> phones, std::span<const int> durations,
                             Domain domain, std::mt19937_64& rng) const {
  if (phones.size() != durations.size() || phones.empty()) {
    throw ShapeError("render: phones and durations must be non-empty and equal length");
  }
  const std::size_t D = prototypes_.cols();
  std::size_t total = 0;
  for (int d : durations) total += static_cast<std::size_t>(d);
  Tensor out({total, D});
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> clean(D);
  std::size_t t = 0;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    auto proto = prototypes_.row(static_cast<std::size_t>(phones[i]));
    if (domain == Domain::kKws && cfg_.kws_channel_shift > 0) {
      for (std::size_t r = 0; r < D; ++r) {
        double s = 0.0;
        auto crow = channel_.row(r);
        for (std::size_t c = 0; c < D; ++c) s += crow[c] * proto[c];
        clean[r] = s;
      }
    } else {
      std::copy(proto.begin(), proto.end(), clean.begin());
    }
    for (int k = 0; k < durations[i]; ++k, ++t) {
      auto row = out.row(t);
      for (std::size_t d = 0; d < D; ++d) {
        row[d] = clean[d] + (cfg_.noise_std > 0 ? cfg_.noise_std * noise(rng) : 0.0);
      }
    }
  }
  return out;
}

Waveform PhoneRenderer::RenderAudio(std::span<const int> phones,
                                    std::span<const int> durations,
                                    std::mt19937_64& rng) const {
  const FrontendConfig fe;
  Waveform wave;
  std::size_t total = 0;
  for (int d : durations) total += static_cast<std::size_t>(d) * kSamplesPerUnit;
  // One window of padding so the last unit still yields a frame.
  const auto pad = static_cast<std::size_t>(fe.mel.window_seconds * wave.sample_rate);
  wave.samples.assign(total + pad, 0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    auto tone_rng = DerivedRng(cfg_.seed, kToneStream, static_cast<std::uint64_t>(phones[i]));
    std::uniform_real_distribution<double> freq(150.0, 7000.0);
    const double f[3] = {freq(tone_rng), freq(tone_rng), freq(tone_rng)};
    const std::size_t len = static_cast<std::size_t>(durations[i]) * kSamplesPerUnit;
    for (std::size_t n = 0; n < len; ++n, ++pos) {
      double s = 0.0;
      for (double fk : f) {
        s += std::sin(2.0 * std::numbers::pi * fk * static_cast<double>(n) / wave.sample_rate);
      }
      s = 3000.0 * s + 3000.0 * cfg_.noise_std * noise(rng);
      wave.samples[pos] = static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
    }
  }
  for (; pos < wave.samples.size(); ++pos) {
    wave.samples[pos] = static_cast<std::int16_t>(
        std::clamp(3000.0 * cfg_.noise_std * noise(rng), -32768.0, 32767.0));
  }
  return wave;
}

namespace {

Utterance MakeUtterance(const PhoneRenderer& r, const SynthConfig& cfg,
                        std::span<const int> phones, Domain domain, std::mt19937_64& rng) {
  std::vector<int> durations(phones.size());
  for (int& d : durations) d = UniformInt(rng, cfg.min_phone_frames, cfg.max_phone_frames);
  Utterance u;
  if (cfg.render_audio) {
    u.features = ComputeFeatures(r.RenderAudio(phones, durations, rng)).frames;
  } else {
    u.features = r.Render(phones, durations, domain, rng);
  }
  return u;
}

}  // namespace

Dataset SynthAsr(const SynthConfig& cfg) {
  const PhoneRenderer renderer(cfg);
  Dataset ds;
  ds.kind = DatasetKind::kAsr;
  ds.seed = cfg.seed;
  ds.dim = cfg.feature_dim;
  ds.utterances.reserve(cfg.n_asr_utts);
  for (int i = 0; i < cfg.n_asr_utts; ++i) {
    auto rng = DerivedRng(cfg.seed, kAsrStream, static_cast<std::uint64_t>(i));
    const int len = UniformInt(rng, cfg.min_asr_phones, cfg.max_asr_phones);
    std::vector<int> phones = RandomPhones(rng, len, cfg.n_phones);
    Utterance u = MakeUtterance(renderer, cfg, phones, Domain::kAsr, rng);
    u.phones = std::move(phones);
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

Dataset SynthKws(const SynthConfig& cfg, KwsSplit split) {
  const PhoneRenderer renderer(cfg);
  const bool eval = split == KwsSplit::kEval;
  const int n_pos = eval ? cfg.n_eval_pos : cfg.n_kws_pos;
  const int n_neg = eval ? cfg.n_eval_neg : cfg.n_kws_neg;
  const std::uint64_t stream = eval ? kKwsEvalStream : kKwsTrainStream;
  const auto kw_len = static_cast<int>(cfg.keyword.size());
  Dataset ds;
  ds.kind = DatasetKind::kKws;
  ds.seed = cfg.seed;
  ds.dim = cfg.feature_dim;
  ds.utterances.reserve(n_pos + n_neg);
  for (int i = 0; i < n_pos + n_neg; ++i) {
    auto rng = DerivedRng(cfg.seed, stream, static_cast<std::uint64_t>(i));
    const bool positive = i < n_pos;
    std::vector<int> core;
    bool with_context = true;
    if (positive) {
      core = cfg.keyword;
    } else if (std::bernoulli_distribution(cfg.confusable_rate)(rng)) {
      // Hard negative: the keyword with 1-2 substituted phones.
      core = cfg.keyword;
      const int subs = std::min(kw_len, UniformInt(rng, 1, 2));
      std::vector<int> slots(kw_len);
      for (int k = 0; k < kw_len; ++k) slots[k] = k;
      std::shuffle(slots.begin(), slots.end(), rng);
      for (int k = 0; k < subs; ++k) {
        int& p = core[slots[k]];
        const int shift = UniformInt(rng, 1, cfg.n_phones - 1);
        p = (p + shift) % cfg.n_phones;
      }
    } else {
      core = RandomPhones(rng, UniformInt(rng, cfg.min_asr_phones, cfg.max_asr_phones),
                          cfg.n_phones);
      with_context = false;
    }
    std::vector<int> phones;
    if (with_context) {
      phones = RandomPhones(rng, UniformInt(rng, 0, cfg.max_context_phones), cfg.n_phones);
    }
    phones.insert(phones.end(), core.begin(), core.end());
    if (with_context) {
      const auto tail =
          RandomPhones(rng, UniformInt(rng, 0, cfg.max_context_phones), cfg.n_phones);
      phones.insert(phones.end(), tail.begin(), tail.end());
    }
    Utterance u = MakeUtterance(renderer, cfg, phones, Domain::kKws, rng);
    u.phrase = positive ? PhraseLabel::kPositive : PhraseLabel::kNegative;
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

// Dataset layout (little-endian):
//   "KWSDATA\0" | u32 version | u8 kind | u64 seed | u32 dim | u64 count |
//   per utterance: u8 kind tag | u32 T | u32 D | labels | f64 T*D frames
//   labels: ASR -> u32 L, L * u32 phone ids; KWS -> u8 phrase class
namespace {
constexpr std::string_view kDatasetMagic{"KWSDATA\0", 8};
}

void WriteDataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kDatasetMagic.data(), kDatasetMagic.size());
  io::WriteUInt<std::uint32_t>(os, kDatasetVersion);
  io::WriteUInt<std::uint8_t>(os, static_cast<std::uint8_t>(ds.kind));
  io::WriteUInt<std::uint64_t>(os, ds.seed);
  io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(ds.dim));
  io::WriteUInt<std::uint64_t>(os, ds.utterances.size());
  for (const Utterance& u : ds.utterances) {
    if (static_cast<int>(u.features.cols()) != ds.dim) {
      throw ShapeError("dataset: utterance width " + std::to_string(u.features.cols()) +
                       " differs from dataset dim " + std::to_string(ds.dim));
    }
    io::WriteUInt<std::uint8_t>(os, static_cast<std::uint8_t>(ds.kind));
    io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(u.features.rows()));
    io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(u.features.cols()));
    if (ds.kind == DatasetKind::kAsr) {
      io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(u.phones.size()));
      for (int p : u.phones) io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(p));
    } else {
      if (!u.phrase) throw ShapeError("dataset: KWS utterance without phrase label");
      io::WriteUInt<std::uint8_t>(os, static_cast<std::uint8_t>(*u.phrase));
    }
    io::WriteF64s(os, u.features.data());
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Dataset ReadDataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path.string() + "'");
  io::ExpectMagic(is, kDatasetMagic);
  const auto version = io::ReadUInt<std::uint32_t>(is);
  if (version != kDatasetVersion) {
    throw FormatError("dataset version " + std::to_string(version) + ", expected " +
                      std::to_string(kDatasetVersion));
  }
  Dataset ds;
  const auto kind = io::ReadUInt<std::uint8_t>(is);
  if (kind > 1) throw FormatError("dataset: unknown kind " + std::to_string(kind));
  ds.kind = static_cast<DatasetKind>(kind);
  ds.seed = io::ReadUInt<std::uint64_t>(is);
  ds.dim = static_cast<int>(io::ReadUInt<std::uint32_t>(is));
  const auto count = io::ReadUInt<std::uint64_t>(is);
  if (count > (1u << 24)) throw FormatError("dataset: implausible utterance count");
  ds.utterances.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (io::ReadUInt<std::uint8_t>(is) != kind) throw FormatError("dataset: mixed kind tags");
    const auto T = io::ReadUInt<std::uint32_t>(is);
    const auto D = io::ReadUInt<std::uint32_t>(is);
    if (T == 0 || static_cast<int>(D) != ds.dim) {
      throw FormatError("dataset: utterance " + std::to_string(i) + " has shape " +
                        std::to_string(T) + "x" + std::to_string(D) + ", dataset dim " +
                        std::to_string(ds.dim));
    }
    Utterance u;
    if (ds.kind == DatasetKind::kAsr) {
      const auto L = io::ReadUInt<std::uint32_t>(is);
      if (L > T) throw FormatError("dataset: label longer than utterance");
      u.phones.resize(L);
      for (int& p : u.phones) {
        p = static_cast<int>(io::ReadUInt<std::uint32_t>(is));
        if (p < 0 || p >= kNumPhones) throw FormatError("dataset: phone id out of range");
      }
    } else {
      const auto label = io::ReadUInt<std::uint8_t>(is);
      if (label > 1) throw FormatError("dataset: bad phrase label");
      u.phrase = static_cast<PhraseLabel>(label);
    }
    u.features = Tensor({T, D});
    io::ReadF64s(is, u.features.data());
    ds.utterances.push_back(std::move(u));
  }
  return ds;
}

}  // namespace kws
