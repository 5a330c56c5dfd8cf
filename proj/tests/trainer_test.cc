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
#include <numeric>
#include <set>

#include "doctest.h"
#include "kws/data.h"
#include "kws/errors.h"
#include "kws/trainer.h"
#include "test_util.h"

namespace kws {
namespace {

TEST_CASE("learning rate anchor points") {
  const TrainConfig cfg;
  CHECK(LrAt(2.0, cfg) == 0.0008);
  CHECK(LrAt(16.0, cfg) == 0.00056);
  CHECK(LrAt(0.0, cfg) == 0.0);
  CHECK(LrAt(1.0, cfg) == doctest::Approx(0.0004).epsilon(1e-15));
  CHECK(LrAt(9.0, cfg) == doctest::Approx(0.00068).epsilon(1e-14));
  CHECK(LrAt(28.0, cfg) == doctest::Approx(0.00056 / 4).epsilon(1e-13));
  // Both one-sided limits meet at the knots.
  for (double knot : {2.0, 16.0}) {
    CHECK(std::abs(LrAt(std::nextafter(knot, 0.0), cfg) - LrAt(knot, cfg)) < 1e-15);
    CHECK(std::abs(LrAt(std::nextafter(knot, 100.0), cfg) - LrAt(knot, cfg)) < 1e-15);
  }
  TrainConfig fixed = cfg;
  fixed.final_decay = 0.5;
  CHECK(LrAt(18.0, fixed) == doctest::Approx(0.00056 * 0.25));
}

TEST_CASE("learning rate decreases after the peak") {
  const TrainConfig cfg;
  double prev = LrAt(2.0, cfg);
  for (double t = 2.25; t <= 28.0; t += 0.25) {
    const double lr = LrAt(t, cfg);
    CHECK(lr < prev);
    prev = lr;
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.Validate());
  c.kws_fraction = 1.5;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TrainConfig{};
  c.mid_epoch = 30;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TrainConfig{};
  c.lr_peak = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TrainConfig{};
  CHECK(c.KwsPerBatch() == 8);
  c.mode = TrainMode::kPhonemeOnly;
  CHECK(c.KwsPerBatch() == 0);
}

TEST_CASE("adam closed forms") {
  ModelParams params;
  params.Set("w", Tensor::Vector({1.0, 2.0}));
  AdamState state;
  GradMap grads;
  grads.emplace("w", Tensor::Vector({0.3, -5.0}));
  AdamStep(params, grads, state, 0.01);
  CHECK(params.Get("w")[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
  CHECK(params.Get("w")[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-9));
  CHECK(state.step == 1);

  const Tensor before = params.Get("w");
  const Tensor m = state.m.at("w"), v = state.v.at("w");
  AdamStep(params, GradMap{{"w", Tensor({2})}}, state, 0.01);
  // Zero gradient: moments decay. The parameter still moves with the
  // remaining first moment, so compare it against the closed form.
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(state.m.at("w")[i] == 0.9 * m[i]);
    CHECK(state.v.at("w")[i] == 0.999 * v[i]);
  }

  ModelParams fresh;
  fresh.Set("w", Tensor::Vector({4.0}));
  AdamState s2;
  AdamStep(fresh, GradMap{{"w", Tensor({1})}}, s2, 0.1);
  CHECK(fresh.Get("w")[0] == 4.0);

  GradMap bad;
  bad.emplace("w", Tensor::Vector({std::nan(""), 0.0}));
  CHECK_THROWS_AS(AdamStep(params, bad, state, 0.01), NumericalError);
}

TEST_CASE("adam converges on a quadratic") {
  ModelParams params;
  params.Set("w", Tensor::Scalar(0.0));
  AdamState state;
  for (int step = 0; step < 100; ++step) {
    const double w = params.Get("w")[0];
    AdamStep(params, GradMap{{"w", Tensor::Scalar(2.0 * (w - 3.0))}}, state, 0.1);
  }
  CHECK(std::abs(params.Get("w")[0] - 3.0) < 0.05);
}

TEST_CASE("global norm clipping") {
  GradMap g;
  g.emplace("a", Tensor::Vector({3.0}));
  g.emplace("b", Tensor::Vector({4.0}));
  CHECK(ClipGlobalNorm(g, 10.0) == 5.0);
  CHECK(g.at("a")[0] == 3.0);
  CHECK(ClipGlobalNorm(g, 1.0) == 5.0);
  CHECK(g.at("a")[0] == doctest::Approx(0.6));
  CHECK(g.at("b")[0] == doctest::Approx(0.8));
}

TEST_CASE("sampler is stratified and covers each epoch") {
  TrainConfig cfg;
  const BatchSampler s(100, 30, cfg);
  CHECK(s.batches_per_epoch() == 5);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::size_t b = 0; b < s.batches_per_epoch(); ++b) {
      const auto batch = s.Get(epoch, b);
      CHECK(batch.kws.size() == 8);
      CHECK(batch.asr.size() == (b < 4 ? 24u : 4u));
      seen.insert(batch.asr.begin(), batch.asr.end());
    }
    CHECK(seen.size() == 100);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 100);
  }
  // The KWS stream visits every utterance once per pass.
  std::vector<std::size_t> stream;
  for (int epoch = 0; epoch < 2; ++epoch)
    for (std::size_t b = 0; b < s.batches_per_epoch(); ++b) {
      const auto batch = s.Get(epoch, b);
      stream.insert(stream.end(), batch.kws.begin(), batch.kws.end());
    }
  for (std::size_t pass = 0; pass + 1 <= stream.size() / 30; ++pass) {
    std::set<std::size_t> unique(stream.begin() + pass * 30, stream.begin() + (pass + 1) * 30);
    CHECK(unique.size() == 30);
  }
  CHECK(s.Get(1, 2).asr == BatchSampler(100, 30, cfg).Get(1, 2).asr);
  CHECK_FALSE(s.Get(0, 0).asr == s.Get(1, 0).asr);
}

TEST_CASE("sampler without kws") {
  TrainConfig cfg;
  cfg.kws_fraction = 0.0;
  const BatchSampler s(64, 0, cfg);
  CHECK(s.batches_per_epoch() == 2);
  CHECK(s.Get(0, 0).asr.size() == 32);
  CHECK(s.Get(0, 0).kws.empty());
  cfg.kws_fraction = 0.25;
  CHECK_THROWS_AS(BatchSampler(64, 0, cfg), ConfigError);
}

TEST_CASE("log records") {
  TrainLogRecord r{3, 7, 1.5, std::nan(""), 0.0008};
  CHECK(FormatLogRecord(r) == "3\t7\t1.5\t-\t0.00080000000000000004");
}

struct TinySetup {
  SynthConfig synth;
  Dataset asr, kws;
  TrainConfig train;
  ModelConfig model;

  explicit TinySetup(TrainMode mode) {
    synth.feature_dim = 12;
    synth.n_phones = 5;
    synth.keyword = {1, 3, 2};
    synth.n_asr_utts = 24;
    synth.n_kws_pos = 8;
    synth.n_kws_neg = 8;
    synth.min_asr_phones = 2;
    synth.max_asr_phones = 4;
    synth.min_phone_frames = 2;
    synth.max_phone_frames = 3;
    synth.max_context_phones = 1;
    asr = SynthAsr(synth);
    kws = SynthKws(synth);
    train.batch_size = 8;
    train.epochs = 6;
    train.warmup_epochs = 1;
    train.mid_epoch = 4;
    train.lr_peak = 0.01;
    train.lr_mid = 0.005;
    train.mode = mode;
    model = testing::SmallModelConfig(mode);
  }
};

TEST_CASE("phoneme-only training lowers the ctc loss") {
  TinySetup s(TrainMode::kPhonemeOnly);
  const TrainResult r = Train(s.asr, s.kws, s.train, s.model);
  CHECK(r.log.size() == 6 * 3);
  auto epoch_mean = [&](int e) {
    double sum = 0.0;
    int n = 0;
    for (const auto& rec : r.log) {
      if (rec.epoch != e) continue;
      CHECK(std::isnan(rec.phrase_loss));
      sum += rec.phone_loss;
      ++n;
    }
    return sum / n;
  };
  CHECK(epoch_mean(5) < 0.8 * epoch_mean(0));
  CHECK(r.checkpoint.counters.at("epoch") == 6);
}

TEST_CASE("training is deterministic across runs and thread counts") {
  for (TrainMode mode : {TrainMode::kConvMtl, TrainMode::kBlstmMtl, TrainMode::kXattnMtl}) {
    TinySetup s(mode);
    TrainOptions opts;
    opts.stop_after_epoch = 2;
    const TrainResult a = Train(s.asr, s.kws, s.train, s.model, opts);
    const TrainResult b = Train(s.asr, s.kws, s.train, s.model, opts);
    s.train.threads = 3;
    const TrainResult c = Train(s.asr, s.kws, s.train, s.model, opts);
    CHECK(a.checkpoint == b.checkpoint);
    CHECK(a.log == b.log);
    CHECK(a.checkpoint == c.checkpoint);
    for (const auto& rec : a.log) CHECK_FALSE(std::isnan(rec.phrase_loss));
  }
}

TEST_CASE("resume from a saved epoch matches a straight run") {
  TinySetup s(TrainMode::kXattnMtl);
  testing::TempDir dir("resume");
  TrainOptions straight_opts;
  straight_opts.stop_after_epoch = 4;
  const TrainResult straight = Train(s.asr, s.kws, s.train, s.model, straight_opts);

  TrainOptions first;
  first.stop_after_epoch = 2;
  first.checkpoint_dir = dir.path();
  Train(s.asr, s.kws, s.train, s.model, first);
  CHECK(std::filesystem::exists(dir.path() / "epoch_001.ckpt"));
  TrainOptions second;
  second.resume = LoadCheckpoint(dir.path() / "epoch_002.ckpt");
  second.stop_after_epoch = 4;
  const TrainResult resumed = Train(s.asr, s.kws, s.train, s.model, second);
  CHECK(resumed.checkpoint == straight.checkpoint);
  CHECK(resumed.log.size() == straight.log.size() / 2);
  CHECK(resumed.log.back() == straight.log.back());

  TrainOptions mismatch;
  mismatch.resume = LoadCheckpoint(dir.path() / "epoch_002.ckpt");
  ModelConfig other = s.model;
  other.blstm.hidden = 7;
  CHECK_THROWS_AS(Train(s.asr, s.kws, s.train, other, mismatch), ConfigError);
}

TEST_CASE("numerical failures carry batch provenance") {
  TinySetup s(TrainMode::kPhonemeOnly);
  s.asr.utterances[0].features[0] = std::numeric_limits<double>::infinity();
  try {
    Train(s.asr, s.kws, s.train, s.model);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("seed 1, epoch 0, batch") != std::string::npos);
  }
}

TEST_CASE("dataset and model dims must agree") {
  TinySetup s(TrainMode::kXattnMtl);
  s.model.encoder.input_dim = 13;
  CHECK_THROWS_AS(Train(s.asr, s.kws, s.train, s.model), ShapeError);
  TinySetup t(TrainMode::kXattnMtl);
  t.train.mode = TrainMode::kConvMtl;
  CHECK_THROWS_AS(Train(t.asr, t.kws, t.train, t.model), ConfigError);
}

TEST_CASE("mixed batches update the encoder from both losses") {
  TinySetup s(TrainMode::kXattnMtl);
  const ModelParams params = InitParams(s.model, 1);
  auto encoder_grad = [&](const Utterance& u, DatasetKind kind) {
    ad::Tape tape;
    BoundParams p(tape, params);
    tape.Backward(UtteranceLoss(p, s.model, u, kind));
    return p.Gradients().at("enc.b0.ff.w1");
  };
  const Tensor ga = encoder_grad(s.asr.utterances[0], DatasetKind::kAsr);
  const Tensor gk = encoder_grad(s.kws.utterances[0], DatasetKind::kKws);
  double na = 0.0, nk = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    na += ga[i] * ga[i];
    nk += gk[i] * gk[i];
  }
  CHECK(na > 0.0);
  CHECK(nk > 0.0);
}

}  // namespace
}  // namespace kws
