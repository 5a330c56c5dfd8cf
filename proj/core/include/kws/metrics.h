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

// Detection scoring and DET-curve evaluation.

#ifndef KWS_METRICS_H_
#define KWS_METRICS_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kws/losses.h"
#include "kws/model.h"
#include "kws/tensor.h"

namespace kws {

enum class Branch { kPhonetic, kPhrase };
std::string_view ToString(Branch branch);

struct ScoredTrial {
  double score = 0.0;  // higher is more keyword-like
  bool is_positive = false;
  friend bool operator==(const ScoredTrial&, const ScoredTrial&) = default;
};

struct DetPoint {
  double threshold = 0.0;  // accept when score >= threshold
  std::size_t false_accepts = 0;
  std::size_t false_rejects = 0;
  double frr = 0.0;
  double fa_measure = 0.0;  // false_accepts / fa_denominator
  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

struct DetCurve {
  std::vector<DetPoint> points;  // thresholds strictly increasing
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double fa_denominator = 1.0;
};

struct OperatingPoint {
  double frr = 0.0;
  double threshold = 0.0;
};

// Positive-class softmax probability from [positive, negative] logits.
double PhraseConfidence(const Tensor& logits);
// log p(positive) - log p(negative); rank-equivalent to PhraseConfidence
// without saturating at 1.
double PhraseLogOdds(const Tensor& logits);
// log p([positive]) - log p([negative]) under phrase CTC on T' x 3 logits.
double PhraseCtcScore(const Tensor& logits);
// Keyword log-likelihood ratio from phone logits: the keyword's CTC lattice
// surrounded by free filler frames (each scored by its best class), minus
// the best-path score of the whole utterance.
double KeywordCtcScore(const Tensor& phone_logits, std::span<const int> keyword,
                       int blank = kPhoneBlank);

// Confidence for a mode/branch pair: probability for two-logit heads, CTC
// log-likelihood ratio otherwise. Throws ConfigError on a mismatch.
double Confidence(TrainMode mode, Branch branch, const Tensor& output,
                  std::span<const int> keyword = {});
// Same as Confidence but log-odds for two-logit heads; what the DET sweep uses.
double DetectionScore(TrainMode mode, Branch branch, const Tensor& output,
                      std::span<const int> keyword = {});

std::vector<Branch> BranchesFor(TrainMode mode);

// Scores every utterance of a KWS dataset on each branch of the model, in
// BranchesFor(mode) order. One forward pass per utterance.
std::vector<std::vector<ScoredTrial>> ScoreBranches(const ModelParams& params,
                                                    const ModelConfig& cfg,
                                                    const std::vector<Tensor>& features,
                                                    const std::vector<bool>& is_positive,
                                                    std::span<const int> keyword);

// Exact DET curve: one point per distinct score plus a final reject-all
// point at +inf. Requires at least one positive and one negative trial.
DetCurve ComputeDetCurve(std::span<const ScoredTrial> trials, double fa_denominator = 1.0);

DetPoint EvaluateAt(std::span<const ScoredTrial> trials, double threshold,
                    double fa_denominator = 1.0);

// Lowest FRR among points whose FA measure is within the target.
OperatingPoint FrrAtFa(const DetCurve& curve, double fa_target);

// Segment (start - 0.5 s, end + 0.3 s) clamped to the utterance.
std::pair<double, double> KeywordSegment(double start_s, double end_s, double utt_len_s);

// Tab-separated "threshold fa_measure frr" rows after a '#' header.
void WriteDetCurve(std::ostream& os, const DetCurve& curve);
void WriteDetCurve(const std::filesystem::path& path, const DetCurve& curve);

// Tab-separated "score label" rows, label 1 for positive trials.
void WriteScores(const std::filesystem::path& path, std::span<const ScoredTrial> trials);
std::vector<ScoredTrial> ReadScores(const std::filesystem::path& path);

}  // namespace kws

#endif  // KWS_METRICS_H_
