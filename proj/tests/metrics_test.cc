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
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kws/errors.h"
#include "kws/metrics.h"
#include "oracles.h"
#include "test_util.h"

namespace kws {
namespace {

oracle::Matrix Rows(const Tensor& t, std::size_t begin, std::size_t end) {
  oracle::Matrix m;
  for (std::size_t r = begin; r < end; ++r) m.emplace_back(t.row(r).begin(), t.row(r).end());
  return m;
}

std::vector<ScoredTrial> HandTrials() {
  return {{0.9, true}, {0.8, true}, {0.85, false}};
}

std::vector<ScoredTrial> RandomTrials(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 30), level(0, 12);
  std::vector<ScoredTrial> trials;
  const int pos = count(rng), neg = count(rng);
  // Coarse score levels force plenty of ties.
  for (int i = 0; i < pos; ++i) trials.push_back({level(rng) * 0.5, true});
  for (int i = 0; i < neg; ++i) trials.push_back({level(rng) * 0.5 - 1.0, false});
  std::shuffle(trials.begin(), trials.end(), rng);
  return trials;
}

TEST_CASE("phrase confidence") {
  CHECK(PhraseConfidence(Tensor::Vector({3.0, 3.0})) == 0.5);
  CHECK(std::abs(PhraseConfidence(Tensor::Vector({800.0, -800.0})) - 1.0) < 1e-12);
  CHECK(PhraseConfidence(Tensor::Vector({-800.0, 800.0})) >= 0.0);
  CHECK(PhraseLogOdds(Tensor::Vector({2.0, -1.0})) == 3.0);
  CHECK(Confidence(TrainMode::kXattnMtl, Branch::kPhrase, Tensor::Vector({0.0, 0.0})) == 0.5);
  CHECK(DetectionScore(TrainMode::kBlstmMtl, Branch::kPhrase, Tensor::Vector({1.0, 0.0})) == 1.0);
  CHECK_THROWS_AS(PhraseConfidence(Tensor::Vector({1, 2, 3})), ShapeError);
  CHECK_THROWS_AS(DetectionScore(TrainMode::kPhonemeOnly, Branch::kPhrase, Tensor({3, 3})),
                  ConfigError);
}

TEST_CASE("phrase ctc score matches alignment enumeration") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor logits = testing::RandomTensor({3, 3}, rng, 3.0);
    const auto m = Rows(logits, 0, 3);
    const double expected =
        std::log(oracle::CtcProbability(m, {0}, 2)) - std::log(oracle::CtcProbability(m, {1}, 2));
    CHECK(std::abs(PhraseCtcScore(logits) - expected) < 1e-10);
    CHECK(DetectionScore(TrainMode::kConvMtl, Branch::kPhrase, logits) == PhraseCtcScore(logits));
  }
}

TEST_CASE("keyword ctc score matches a segmentation oracle") {
  std::mt19937_64 rng(2);
  const std::vector<int> keyword = {0, 1};
  for (std::size_t T = 1; T <= 6; ++T) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor logits = testing::RandomTensor({T, 3}, rng, 3.0);
      std::vector<double> best(T);
      double free = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const auto p = oracle::Softmax({logits.at(t, 0), logits.at(t, 1), logits.at(t, 2)});
        best[t] = std::log(*std::max_element(p.begin(), p.end()));
        free += best[t];
      }
      // Sum over keyword spans [s, e]; frames outside the span take the best class.
      double forced = 0.0;
      for (std::size_t s = 0; s < T; ++s) {
        for (std::size_t e = s; e < T; ++e) {
          double filler = 0.0;
          for (std::size_t t = 0; t < T; ++t)
            if (t < s || t > e) filler += best[t];
          forced += std::exp(filler) * oracle::CtcProbability(Rows(logits, s, e + 1), keyword, 2);
        }
      }
      const double score = KeywordCtcScore(logits, keyword, 2);
      if (T < 2) {
        CHECK(score < -1e299);
      } else {
        CHECK(std::abs(score - (std::log(forced) - free)) < 1e-10);
      }
      CHECK(DetectionScore(TrainMode::kConvMtl, Branch::kPhonetic, logits, keyword) == score);
    }
  }
}

TEST_CASE("keyword score prefers utterances containing the keyword") {
  // Frame-level one-hot-ish logits spelling a phone string, blank = 4.
  auto spell = [](const std::vector<int>& phones) {
    Tensor t({phones.size(), 5}, -4.0);
    for (std::size_t i = 0; i < phones.size(); ++i) t.at(i, phones[i]) = 4.0;
    return t;
  };
  const std::vector<int> kw = {1, 2, 3};
  const double hit = KeywordCtcScore(spell({0, 1, 2, 3, 0}), kw, 4);
  const double miss = KeywordCtcScore(spell({0, 1, 0, 3, 0}), kw, 4);
  CHECK(hit > miss);
  CHECK(hit <= 1e-9 + std::log(10.0));
}

TEST_CASE("hand enumerated det curve") {
  const auto trials = HandTrials();
  const DetCurve c = ComputeDetCurve(trials);
  REQUIRE(c.points.size() == 4);
  const double thresholds[] = {0.8, 0.85, 0.9, std::numeric_limits<double>::infinity()};
  const std::size_t fa[] = {1, 1, 0, 0}, fr[] = {0, 1, 1, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c.points[i].threshold == thresholds[i]);
    CHECK(c.points[i].false_accepts == fa[i]);
    CHECK(c.points[i].false_rejects == fr[i]);
    CHECK(c.points[i].frr == fr[i] / 2.0);
  }
  const DetPoint at = EvaluateAt(trials, 0.86);
  CHECK(at.frr == 0.5);
  CHECK(at.false_accepts == 0);
  const OperatingPoint op = FrrAtFa(c, 0.0);
  CHECK(op.frr == 0.5);
  CHECK(op.threshold == 0.9);
  CHECK(FrrAtFa(c, std::numeric_limits<double>::infinity()).frr == 0.0);
}

TEST_CASE("degenerate trial sets") {
  const std::vector<ScoredTrial> same = {{1.0, true}, {1.0, false}, {1.0, true}};
  const DetCurve c = ComputeDetCurve(same);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].frr == 0.0);
  CHECK(c.points[0].false_accepts == 1);
  CHECK(c.points[1].frr == 1.0);
  CHECK(c.points[1].false_accepts == 0);
  const std::vector<ScoredTrial> only_pos = {{1.0, true}};
  CHECK_THROWS_AS(ComputeDetCurve(only_pos), std::invalid_argument);
  const std::vector<ScoredTrial> nan = {{std::nan(""), true}, {0.0, false}};
  CHECK_THROWS_AS(ComputeDetCurve(nan), NumericalError);
  DetCurve all_fa;
  all_fa.points.push_back({0.0, 3, 0, 0.0, 3.0});
  CHECK_THROWS_AS(FrrAtFa(all_fa, 1.0), std::invalid_argument);
}

TEST_CASE("perfectly separated scores") {
  const std::vector<ScoredTrial> t = {{2.0, true}, {3.0, true}, {-1.0, false}, {0.5, false}};
  const DetCurve c = ComputeDetCurve(t);
  bool perfect = false;
  for (const auto& p : c.points) perfect |= p.frr == 0.0 && p.false_accepts == 0;
  CHECK(perfect);
  for (double target : {0.0, 1.0, 5.0}) CHECK(FrrAtFa(c, target).frr == 0.0);
}

TEST_CASE("det curves are monotone for random trial sets") {
  std::mt19937_64 rng(3);
  for (int set = 0; set < 1000; ++set) {
    const auto trials = RandomTrials(rng);
    const DetCurve c = ComputeDetCurve(trials, 2.5);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      REQUIRE(c.points[i].threshold > c.points[i - 1].threshold);
      REQUIRE(c.points[i].false_accepts <= c.points[i - 1].false_accepts);
      REQUIRE(c.points[i].false_rejects >= c.points[i - 1].false_rejects);
    }
    // Every point agrees with a direct evaluation at its threshold.
    for (const auto& p : c.points) REQUIRE(EvaluateAt(trials, p.threshold, 2.5) == p);
    double prev = 2.0;
    for (double target = 0.0; target <= 14.0; target += 0.4) {
      const double frr = FrrAtFa(c, target).frr;
      REQUIRE(frr <= prev);
      prev = frr;
    }
  }
}

TEST_CASE("det points are invariant under monotone transforms") {
  std::mt19937_64 rng(4);
  for (int set = 0; set < 200; ++set) {
    const auto trials = RandomTrials(rng);
    auto transformed = trials;
    for (auto& t : transformed) t.score = std::exp(0.7 * t.score) + 3.0 * t.score;
    const DetCurve a = ComputeDetCurve(trials), b = ComputeDetCurve(transformed);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      REQUIRE(a.points[i].frr == b.points[i].frr);
      REQUIRE(a.points[i].fa_measure == b.points[i].fa_measure);
    }
  }
}

TEST_CASE("keyword segment") {
  CHECK(KeywordSegment(1.0, 2.0, 10.0) == std::pair{0.5, 2.3});
  CHECK(KeywordSegment(0.2, 2.0, 2.1) == std::pair{0.0, 2.1});
  const auto [s, e] = KeywordSegment(3.0, 3.0, 10.0);
  CHECK(e - s == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(KeywordSegment(2.0, 1.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(KeywordSegment(1.0, 11.0, 10.0), std::invalid_argument);
}

TEST_CASE("det and score files") {
  testing::TempDir dir("metrics");
  std::mt19937_64 rng(5);
  std::vector<ScoredTrial> trials;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) trials.push_back({n(rng), i % 3 == 0});
  WriteScores(dir.path() / "s.tsv", trials);
  CHECK(ReadScores(dir.path() / "s.tsv") == trials);
  const DetCurve c = ComputeDetCurve(trials);
  std::ostringstream os;
  WriteDetCurve(os, c);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "# threshold\tfa_measure\tfrr");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line); ++rows) {
    std::istringstream fields(line);
    std::string th, fa, frr;
    fields >> th >> fa >> frr;
    REQUIRE(rows < c.points.size());
    // strtod reads the trailing reject-all threshold written as "inf".
    CHECK(std::strtod(th.c_str(), nullptr) == c.points[rows].threshold);
    CHECK(std::stod(fa) == c.points[rows].fa_measure);
    CHECK(std::stod(frr) == c.points[rows].frr);
  }
  CHECK(rows == c.points.size());
  testing::WriteFile(dir.path() / "bad.tsv", "0.5\t2\n");
  CHECK_THROWS_AS(ReadScores(dir.path() / "bad.tsv"), FormatError);
  CHECK_THROWS_AS(ReadScores(dir.path() / "none.tsv"), IoError);
}

TEST_CASE("branch scoring runs one pass per utterance") {
  const ModelConfig cfg = testing::SmallModelConfig(TrainMode::kConvMtl);
  const ModelParams params = InitParams(cfg, 3);
  std::mt19937_64 rng(6);
  std::vector<Tensor> feats = {testing::RandomTensor({5, 12}, rng),
                               testing::RandomTensor({2, 12}, rng)};
  const std::vector<int> kw = {1, 2};
  const auto scores = ScoreBranches(params, cfg, feats, {true, false}, kw);
  REQUIRE(scores.size() == 2);
  const ModelOutputs y = Infer(params, cfg, feats[0]);
  CHECK(scores[0][0].score == KeywordCtcScore(y.phone_logits, kw, 5));
  CHECK(scores[1][0].score == PhraseCtcScore(y.phrase_output));
  CHECK(scores[0][1].is_positive == false);
  CHECK(BranchesFor(TrainMode::kPhonemeOnly).size() == 1);
}

}  // namespace
}  // namespace kws
