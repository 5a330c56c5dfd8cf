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

#include "kws/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "kws/errors.h"
#include "kws/losses.h"

namespace kws {
namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();
constexpr double kUnreachableScore = -1e300;

double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

Tensor LogSoftmax(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    auto r = out.row(t);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double lz = mx + std::log(z);
    for (double& v : r) v -= lz;
  }
  return out;
}

void RequireTwoLogits(const Tensor& logits) {
  if (logits.size() != 2) {
    throw ShapeError("expected 2 phrase logits, got " + ShapeToString(logits.shape()));
  }
}

bool IsTwoLogitMode(TrainMode mode) {
  return mode == TrainMode::kXattnMtl || mode == TrainMode::kBlstmMtl;
}

}  // namespace

std::string_view ToString(Branch branch) {
  return branch == Branch::kPhonetic ? "phonetic" : "phrase";
}

double PhraseConfidence(const Tensor& logits) {
  RequireTwoLogits(logits);
  const double d = logits[1] - logits[0];
  // 1 / (1 + exp(neg - pos)), evaluated without overflow.
  if (d <= 0.0) return 1.0 / (1.0 + std::exp(d));
  const double e = std::exp(-d);
  return e / (1.0 + e);
}

double PhraseLogOdds(const Tensor& logits) {
  RequireTwoLogits(logits);
  return logits[0] - logits[1];
}

double PhraseCtcScore(const Tensor& logits) {
  if (logits.rank() != 2 || logits.cols() != 3) {
    throw ShapeError("phrase ctc score expects T x 3 logits, got " +
                     ShapeToString(logits.shape()));
  }
  const Tensor lp = LogSoftmax(logits);
  const int pos[] = {static_cast<int>(PhraseLabel::kPositive)};
  const int neg[] = {static_cast<int>(PhraseLabel::kNegative)};
  return CtcLogProb(lp, pos, kPhraseBlank) - CtcLogProb(lp, neg, kPhraseBlank);
}

double KeywordCtcScore(const Tensor& phone_logits, std::span<const int> keyword, int blank) {
  if (keyword.empty()) throw ConfigError("keyword must not be empty");
  const Tensor lp = LogSoftmax(phone_logits);
  const std::size_t T = lp.rows();
  std::vector<double> best(T);
  double free_score = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    auto r = lp.row(t);
    best[t] = *std::max_element(r.begin(), r.end());
    free_score += best[t];
  }
  // Too short to hold the keyword at all.
  if (CtcMinFrames(keyword) > T) return kUnreachableScore;

  std::vector<int> ext(2 * keyword.size() + 1, blank);
  for (std::size_t i = 0; i < keyword.size(); ++i) ext[2 * i + 1] = keyword[i];
  const std::size_t S = ext.size();
  // State layout: 0 = leading filler, 1..S = keyword lattice, S+1 = trailing filler.
  std::vector<double> prev(S + 2, kLogZero), cur(S + 2);
  prev[0] = best[0];
  prev[1] = lp.at(0, ext[0]);
  prev[2] = lp.at(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    std::fill(cur.begin(), cur.end(), kLogZero);
    cur[0] = prev[0] + best[t];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s + 1];
      if (s >= 1) a = LogAdd(a, prev[s]);
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]) a = LogAdd(a, prev[s - 1]);
      if (s <= 1) a = LogAdd(a, prev[0]);
      if (a != kLogZero) cur[s + 1] = a + lp.at(t, ext[s]);
    }
    double tail = LogAdd(prev[S + 1], LogAdd(prev[S], prev[S - 1]));
    if (tail != kLogZero) cur[S + 1] = tail + best[t];
    std::swap(prev, cur);
  }
  const double forced = LogAdd(prev[S + 1], LogAdd(prev[S], prev[S - 1]));
  return forced - free_score;
}

std::vector<Branch> BranchesFor(TrainMode mode) {
  if (mode == TrainMode::kPhonemeOnly) return {Branch::kPhonetic};
  return {Branch::kPhonetic, Branch::kPhrase};
}

double Confidence(TrainMode mode, Branch branch, const Tensor& output,
                  std::span<const int> keyword) {
  if (branch == Branch::kPhrase && IsTwoLogitMode(mode)) return PhraseConfidence(output);
  return DetectionScore(mode, branch, output, keyword);
}

double DetectionScore(TrainMode mode, Branch branch, const Tensor& output,
                      std::span<const int> keyword) {
  if (branch == Branch::kPhonetic) {
    if (output.rank() != 2 || output.cols() < 2) {
      throw ConfigError("phonetic branch expects T x C phone logits, got " +
                        ShapeToString(output.shape()));
    }
    // The last phone logit is the blank.
    return KeywordCtcScore(output, keyword, static_cast<int>(output.cols()) - 1);
  }
  switch (mode) {
    case TrainMode::kPhonemeOnly:
      throw ConfigError("phoneme_only models have no phrase branch");
    case TrainMode::kConvMtl:
      return PhraseCtcScore(output);
    case TrainMode::kBlstmMtl:
    case TrainMode::kXattnMtl:
      return PhraseLogOdds(output);
  }
  throw ConfigError("unknown mode");
}

std::vector<std::vector<ScoredTrial>> ScoreBranches(const ModelParams& params,
                                                    const ModelConfig& cfg,
                                                    const std::vector<Tensor>& features,
                                                    const std::vector<bool>& is_positive,
                                                    std::span<const int> keyword) {
  if (features.size() != is_positive.size()) {
    throw ShapeError("score: features and labels differ in count");
  }
  const std::vector<Branch> branches = BranchesFor(cfg.mode);
  std::vector<std::vector<ScoredTrial>> out(branches.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const ModelOutputs y = Infer(params, cfg, features[i]);
    for (std::size_t b = 0; b < branches.size(); ++b) {
      const Tensor& o = branches[b] == Branch::kPhonetic ? y.phone_logits : y.phrase_output;
      out[b].push_back({DetectionScore(cfg.mode, branches[b], o, keyword), is_positive[i]});
    }
  }
  return out;
}

DetCurve ComputeDetCurve(std::span<const ScoredTrial> trials, double fa_denominator) {
  if (!(fa_denominator > 0.0)) throw ConfigError("fa denominator must be positive");
  DetCurve curve;
  curve.fa_denominator = fa_denominator;
  for (const ScoredTrial& t : trials) {
    if (!std::isfinite(t.score)) throw NumericalError("non-finite trial score");
    (t.is_positive ? curve.positives : curve.negatives)++;
  }
  if (curve.positives == 0 || curve.negatives == 0) {
    throw std::invalid_argument("det curve needs at least one positive and one negative trial");
  }
  std::vector<ScoredTrial> sorted(trials.begin(), trials.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredTrial& a, const ScoredTrial& b) {
    return a.score < b.score;
  });
  // Walk thresholds upward; everything strictly below the threshold is rejected.
  std::size_t rejected_pos = 0, rejected_neg = 0;
  auto push = [&](double threshold) {
    DetPoint p;
    p.threshold = threshold;
    p.false_rejects = rejected_pos;
    p.false_accepts = curve.negatives - rejected_neg;
    p.frr = static_cast<double>(p.false_rejects) / static_cast<double>(curve.positives);
    p.fa_measure = static_cast<double>(p.false_accepts) / fa_denominator;
    curve.points.push_back(p);
  };
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].score;
    push(s);
    for (; i < sorted.size() && sorted[i].score == s; ++i) {
      (sorted[i].is_positive ? rejected_pos : rejected_neg)++;
    }
  }
  push(std::numeric_limits<double>::infinity());
  return curve;
}

DetPoint EvaluateAt(std::span<const ScoredTrial> trials, double threshold,
                    double fa_denominator) {
  DetPoint p;
  p.threshold = threshold;
  std::size_t pos = 0;
  for (const ScoredTrial& t : trials) {
    const bool accept = t.score >= threshold;
    if (t.is_positive) {
      ++pos;
      if (!accept) ++p.false_rejects;
    } else if (accept) {
      ++p.false_accepts;
    }
  }
  p.frr = pos ? static_cast<double>(p.false_rejects) / static_cast<double>(pos) : 0.0;
  p.fa_measure = static_cast<double>(p.false_accepts) / fa_denominator;
  return p;
}

OperatingPoint FrrAtFa(const DetCurve& curve, double fa_target) {
  if (curve.points.empty()) throw std::invalid_argument("empty det curve");
  bool found = false;
  OperatingPoint best;
  for (const DetPoint& p : curve.points) {
    if (p.fa_measure <= fa_target && (!found || p.frr < best.frr)) {
      best = {p.frr, p.threshold};
      found = true;
    }
  }
  if (!found) {
    throw std::invalid_argument("no operating point with FA measure <= " +
                                std::to_string(fa_target));
  }
  return best;
}

std::pair<double, double> KeywordSegment(double start_s, double end_s, double utt_len_s) {
  if (!(start_s >= 0.0 && start_s <= end_s && end_s <= utt_len_s)) {
    throw std::invalid_argument("keyword segment needs 0 <= start <= end <= length");
  }
  return {std::max(0.0, start_s - 0.5), std::min(utt_len_s, end_s + 0.3)};
}

void WriteDetCurve(std::ostream& os, const DetCurve& curve) {
  os << "# threshold\tfa_measure\tfrr\n";
  os << std::setprecision(17);
  for (const DetPoint& p : curve.points) {
    os << p.threshold << '\t' << p.fa_measure << '\t' << p.frr << '\n';
  }
}

void WriteDetCurve(const std::filesystem::path& path, const DetCurve& curve) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  WriteDetCurve(os, curve);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

void WriteScores(const std::filesystem::path& path, std::span<const ScoredTrial> trials) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "# score\tlabel\n" << std::setprecision(17);
  for (const ScoredTrial& t : trials) os << t.score << '\t' << (t.is_positive ? 1 : 0) << '\n';
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<ScoredTrial> ReadScores(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open score file '" + path.string() + "'");
  std::vector<ScoredTrial> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ScoredTrial t;
    int label = -1;
    if (!(ss >> t.score >> label) || (label != 0 && label != 1)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected '<score> <0|1>'");
    }
    t.is_positive = label == 1;
    trials.push_back(t);
  }
  return trials;
}

}  // namespace kws
