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

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kws/errors.h"
#include "kws/features.h"
#include "test_util.h"

namespace kws {
namespace {

Waveform Sine(double hz, double amplitude, std::size_t n) {
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(static_cast<std::int16_t>(
        std::lround(amplitude * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0))));
  }
  return w;
}

Waveform Noise(std::size_t n, int amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-amplitude, amplitude);
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(static_cast<std::int16_t>(u(rng)));
  return w;
}

FeatureSequence Ramp(std::size_t T, std::size_t D) {
  FeatureSequence f{Tensor({T, D}), 0.01};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) f.frames.at(t, d) = 100.0 * t + d;
  return f;
}

TEST_CASE("fft matches a direct dft") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t size : {1u, 2u, 8u, 64u}) {
    std::vector<std::complex<double>> x(size);
    for (auto& v : x) v = {n(rng), n(rng)};
    auto y = x;
    Fft(y);
    for (std::size_t k = 0; k < size; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t j = 0; j < size; ++j) {
        s += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * double(j * k) / double(size));
      }
      CHECK(std::abs(s - y[k]) < 1e-10);
    }
  }
  std::vector<std::complex<double>> bad(6);
  CHECK_THROWS(Fft(bad));
}

TEST_CASE("mel centres are evenly spaced on the mel scale") {
  const LogMelConfig cfg;
  const double lo = 2595.0 * std::log10(1.0 + cfg.low_hz / 700.0);
  const double hi = 2595.0 * std::log10(1.0 + cfg.high_hz / 700.0);
  const auto centres = MelCenterFrequencies(cfg);
  REQUIRE(centres.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    const double mel = lo + (hi - lo) * double(i + 1) / 41.0;
    CHECK(centres[i] == doctest::Approx(700.0 * (std::pow(10.0, mel / 2595.0) - 1.0)));
  }
  CHECK(MelToHz(HzToMel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
}

TEST_CASE("a pure tone peaks in the filter centred nearest to it") {
  const LogMelConfig cfg;
  const double lo = 2595.0 * std::log10(1.0 + cfg.low_hz / 700.0);
  const double hi = 2595.0 * std::log10(1.0 + cfg.high_hz / 700.0);
  for (double hz : {300.0, 1000.0, 2500.0, 5000.0}) {
    std::size_t nearest = 0;
    double best = 1e30;
    for (std::size_t i = 0; i < 40; ++i) {
      const double mel = lo + (hi - lo) * double(i + 1) / 41.0;
      const double centre = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
      if (std::abs(centre - hz) < best) {
        best = std::abs(centre - hz);
        nearest = i;
      }
    }
    const FeatureSequence f = LogMel(Sine(hz, 8000.0, 16000), cfg);
    for (std::size_t t = 0; t < f.num_frames(); ++t) {
      const auto row = f.frames.row(t);
      const auto argmax = std::max_element(row.begin(), row.end()) - row.begin();
      INFO("tone " << hz << " frame " << t);
      CHECK(static_cast<std::size_t>(argmax) == nearest);
    }
  }
}

TEST_CASE("silence hits the floor exactly") {
  Waveform w;
  w.samples.assign(4000, 0);
  const FeatureSequence f = LogMel(w);
  for (double v : f.frames.data()) CHECK(v == std::log(1e-10));
}

TEST_CASE("frame count arithmetic") {
  for (std::size_t len : {400u, 401u, 559u, 560u, 561u, 16000u, 12345u}) {
    const FeatureSequence f = LogMel(Noise(len, 3000, len));
    CHECK(f.num_frames() == 1 + (len - 400) / 160);
    CHECK(f.dim() == 40);
    CHECK(f.frames.AllFinite());
    CHECK(f.frame_shift_seconds == doctest::Approx(0.01));
  }
  CHECK_THROWS_AS(LogMel(Noise(399, 3000, 1)), ShapeError);
}

TEST_CASE("doubling the waveform shifts log energies by ln 4") {
  const Waveform w = Noise(8000, 4000, 7);
  Waveform w2 = w;
  for (auto& s : w2.samples) s = static_cast<std::int16_t>(2 * s);
  const FeatureSequence a = LogMel(w), b = LogMel(w2);
  const double floor = std::log(1e-10);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (a.frames[i] == floor || b.frames[i] == floor) continue;
    CHECK(std::abs(b.frames[i] - a.frames[i] - std::log(4.0)) < 1e-12);
    ++checked;
  }
  CHECK(checked > a.frames.size() / 2);
}

TEST_CASE("stack context") {
  SUBCASE("single frame is replicated") {
    const FeatureSequence s = StackContext(Ramp(1, 40));
    REQUIRE(s.frames.shape() == Shape{1, 280});
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t d = 0; d < 40; ++d) CHECK(s.frames.at(0, k * 40 + d) == double(d));
  }
  SUBCASE("interior frame concatenates neighbours") {
    const FeatureSequence s = StackContext(Ramp(10, 40));
    CHECK(s.frames.shape() == Shape{10, 280});
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t d = 0; d < 40; ++d)
        CHECK(s.frames.at(5, k * 40 + d) == 100.0 * (5 + k - 3) + d);
  }
  SUBCASE("edges replicate") {
    const FeatureSequence s = StackContext(Ramp(4, 2), 2, 1);
    CHECK(s.frames.shape() == Shape{4, 8});
    const double expected[] = {0, 1, 0, 1, 0, 1, 100, 101};
    for (std::size_t i = 0; i < 8; ++i) CHECK(s.frames.at(0, i) == expected[i]);
  }
}

TEST_CASE("subsample") {
  const FeatureSequence s7 = Subsample(Ramp(7, 2));
  REQUIRE(s7.num_frames() == 3);
  CHECK(s7.frames.at(0, 0) == 0.0);
  CHECK(s7.frames.at(1, 0) == 300.0);
  CHECK(s7.frames.at(2, 0) == 600.0);
  CHECK(s7.frame_shift_seconds == doctest::Approx(0.03));
  CHECK(Subsample(Ramp(3, 2)).num_frames() == 1);
  const FeatureSequence shifted = Subsample(Ramp(7, 2), 3, 1);
  CHECK(shifted.num_frames() == 2);
  CHECK(shifted.frames.at(1, 0) == 400.0);
}

TEST_CASE("stack then subsample follows the original frame indices") {
  const FeatureSequence out = Subsample(StackContext(Ramp(20, 3)));
  REQUIRE(out.num_frames() == 7);
  for (std::size_t t = 0; t < 7; ++t) {
    for (int k = -3; k <= 3; ++k) {
      const int src = std::clamp(static_cast<int>(3 * t) + k, 0, 19);
      for (std::size_t d = 0; d < 3; ++d) {
        CHECK(out.frames.at(t, (k + 3) * 3 + d) == 100.0 * src + d);
      }
    }
  }
}

TEST_CASE("full pipeline") {
  const Waveform w = Noise(16000, 2000, 3);
  const FeatureSequence a = ComputeFeatures(w), b = ComputeFeatures(w);
  CHECK(a.frames == b.frames);
  CHECK(a.dim() == 280);
  CHECK(a.num_frames() == (98 + 2) / 3);
  CHECK(a.frame_shift_seconds == doctest::Approx(0.03));
  FeatureSequence m = LogMel(w);
  MeanNormalize(m);
  for (std::size_t d = 0; d < 40; ++d) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.num_frames(); ++t) s += m.frames.at(t, d);
    CHECK(std::abs(s) < 1e-9);
  }
}

TEST_CASE("wav round trip and errors") {
  testing::TempDir dir("wav");
  const Waveform w = Noise(1234, 30000, 4);
  WriteWav(dir.path() / "a.wav", w);
  const Waveform r = ReadWav(dir.path() / "a.wav");
  CHECK(r.samples == w.samples);
  CHECK(r.sample_rate == 16000);
  CHECK_THROWS_AS(ReadWav(dir.path() / "missing.wav"), IoError);

  std::string bytes = testing::ReadFile(dir.path() / "a.wav");
  // Channel count lives at byte 22 of a canonical header.
  bytes[22] = 2;
  testing::WriteFile(dir.path() / "stereo.wav", bytes);
  CHECK_THROWS_AS(ReadWav(dir.path() / "stereo.wav"), FormatError);
  testing::WriteFile(dir.path() / "junk.wav", "RIFX1234");
  CHECK_THROWS_AS(ReadWav(dir.path() / "junk.wav"), FormatError);
}

}  // namespace
}  // namespace kws
