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

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "kws/autodiff.h"
#include "kws/config.h"
#include "kws/data.h"
#include "kws/features.h"
#include "kws/losses.h"
#include "kws/model.h"
#include "kws/trainer.h"

namespace kws {
namespace {

Tensor Random(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({rows, cols});
  for (double& v : t.data()) v = n(rng);
  return t;
}

void BM_MatMulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = Random(n, n, rng), b = Random(n, n, rng);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var y = ad::Sum(ad::MatMul(tape.Leaf(a), tape.Leaf(b)));
    tape.Backward(y);
    benchmark::DoNotOptimize(tape.Value(y));
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatMulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const RunConfig cfg = RunConfig::Desk();
  const ModelParams params = InitParams(cfg.model, 1);
  std::mt19937_64 rng(2);
  const Tensor x = Random(static_cast<std::size_t>(state.range(0)),
                          static_cast<std::size_t>(cfg.model.encoder.input_dim), rng);
  for (auto _ : state) {
    ad::Tape tape;
    BoundParams p(tape, params);
    const EncoderOutput enc = Encode(p, tape.Constant(x), cfg.model.encoder);
    ad::Var y = ad::Sum(enc.phone_logits);
    tape.Backward(y);
    benchmark::DoNotOptimize(p.Gradients());
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_UtteranceLoss(benchmark::State& state) {
  RunConfig cfg = RunConfig::Desk();
  cfg.Set("mode", std::string(ToString(static_cast<TrainMode>(state.range(0)))));
  const ModelParams params = InitParams(cfg.model, 1);
  cfg.synth.n_kws_pos = 1;
  cfg.synth.n_kws_neg = 0;
  const Dataset kws = SynthKws(cfg.synth);
  const Dataset asr = SynthAsr(cfg.synth);
  const bool phrase = cfg.model.mode != TrainMode::kPhonemeOnly;
  const Utterance& utt = phrase ? kws.utterances[0] : asr.utterances[0];
  for (auto _ : state) {
    ad::Tape tape;
    BoundParams p(tape, params);
    ad::Var loss =
        UtteranceLoss(p, cfg.model, utt, phrase ? DatasetKind::kKws : DatasetKind::kAsr);
    tape.Backward(loss);
    benchmark::DoNotOptimize(p.Gradients());
  }
  state.SetLabel(std::string(ToString(cfg.model.mode)));
}
BENCHMARK(BM_UtteranceLoss)
    ->DenseRange(0, 3)
    ->Unit(benchmark::kMillisecond);

void BM_CtcLoss(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const Tensor logits = Random(t, 54, rng);
  std::uniform_int_distribution<int> phone(0, kPhoneBlank - 1);
  std::vector<int> labels(t / 4);
  for (int& l : labels) l = phone(rng);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var loss = CtcLoss(tape.Leaf(logits), labels, kPhoneBlank);
    tape.Backward(loss);
    benchmark::DoNotOptimize(tape.Value(loss));
  }
}
BENCHMARK(BM_CtcLoss)->Arg(50)->Arg(100)->Arg(200);

void BM_LogMelFrontend(benchmark::State& state) {
  Waveform wave;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3000.0);
  wave.samples.resize(static_cast<std::size_t>(state.range(0)) * wave.sample_rate);
  for (auto& s : wave.samples) {
    s = static_cast<std::int16_t>(std::clamp(n(rng), -32768.0, 32767.0));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeFeatures(wave));
  }
  state.SetLabel("seconds of audio per iteration");
}
BENCHMARK(BM_LogMelFrontend)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace kws

BENCHMARK_MAIN();
