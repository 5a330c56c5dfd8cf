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

#include "kws/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "kws/errors.h"

namespace kws {
namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

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

void ValidateCtc(std::size_t frames, std::size_t classes, std::span<const int> labels,
                 int blank) {
  if (classes < 2) throw ShapeError("ctc: need at least 2 classes");
  if (blank < 0 || static_cast<std::size_t>(blank) >= classes) {
    throw ShapeError("ctc: blank id " + std::to_string(blank) + " out of range");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes || l == blank) {
      throw ShapeError("ctc: label id " + std::to_string(l) + " invalid");
    }
  }
  if (CtcMinFrames(labels) > frames) {
    throw NumericalError("ctc: label sequence of length " + std::to_string(labels.size()) +
                         " needs " + std::to_string(CtcMinFrames(labels)) +
                         " frames, only " + std::to_string(frames) + " available");
  }
}

// Blank-augmented target: b l1 b l2 ... lL b.
std::vector<int> Extend(std::span<const int> labels, int blank) {
  std::vector<int> ext(2 * labels.size() + 1, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

bool CanSkip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

// alpha[t][s], emission at t included.
std::vector<double> Forward(const Tensor& lp, const std::vector<int>& ext, int blank) {
  const std::size_t T = lp.rows(), S = ext.size();
  std::vector<double> alpha(T * S, kLogZero);
  alpha[0] = lp.at(0, ext[0]);
  if (S > 1) alpha[1] = lp.at(0, ext[1]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = LogAdd(a, alpha[(t - 1) * S + s - 1]);
      if (CanSkip(ext, s, blank)) a = LogAdd(a, alpha[(t - 1) * S + s - 2]);
      if (a != kLogZero) alpha[t * S + s] = a + lp.at(t, ext[s]);
    }
  }
  return alpha;
}

// beta[t][s], emission at t included.
std::vector<double> Backward(const Tensor& lp, const std::vector<int>& ext, int blank) {
  const std::size_t T = lp.rows(), S = ext.size();
  std::vector<double> beta(T * S, kLogZero);
  beta[(T - 1) * S + S - 1] = lp.at(T - 1, ext[S - 1]);
  if (S > 1) beta[(T - 1) * S + S - 2] = lp.at(T - 1, ext[S - 2]);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta[(t + 1) * S + s];
      if (s + 1 < S) b = LogAdd(b, beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && CanSkip(ext, s + 2, blank)) b = LogAdd(b, beta[(t + 1) * S + s + 2]);
      if (b != kLogZero) beta[t * S + s] = b + lp.at(t, ext[s]);
    }
  }
  return beta;
}

double Total(const std::vector<double>& alpha, std::size_t T, std::size_t S) {
  double total = alpha[(T - 1) * S + S - 1];
  if (S > 1) total = LogAdd(total, alpha[(T - 1) * S + S - 2]);
  return total;
}

}  // namespace

std::size_t CtcMinFrames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

double CtcLogProb(const Tensor& log_probs, std::span<const int> labels, int blank) {
  ValidateCtc(log_probs.rows(), log_probs.cols(), labels, blank);
  const std::vector<int> ext = Extend(labels, blank);
  return Total(Forward(log_probs, ext, blank), log_probs.rows(), ext.size());
}

ad::Var CtcLoss(ad::Var logits, std::span<const int> labels, int blank) {
  if (logits.value().rank() != 2) {
    throw ShapeError("ctc: logits must be T x C, got " + ShapeToString(logits.shape()));
  }
  const std::size_t T = logits.rows(), C = logits.cols();
  ValidateCtc(T, C, labels, blank);
  const Tensor lp = LogSoftmax(logits.value());
  const std::vector<int> ext = Extend(labels, blank);
  const std::size_t S = ext.size();
  const std::vector<double> alpha = Forward(lp, ext, blank);
  const double log_p = Total(alpha, T, S);
  if (!std::isfinite(log_p)) throw NumericalError("ctc: zero-probability target");

  // d(-log p)/d z[t,k] = y[t,k] - sum_{s: ext[s]=k} exp(alpha + beta - lp[t,k] - log p)
  const std::vector<double> beta = Backward(lp, ext, blank);
  Tensor dlogits({T, C});
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> occ(C, kLogZero);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha[t * S + s] + beta[t * S + s];
      if (ab == kLogZero || !std::isfinite(ab)) continue;
      occ[ext[s]] = LogAdd(occ[ext[s]], ab - lp.at(t, ext[s]));
    }
    for (std::size_t k = 0; k < C; ++k) {
      const double post = occ[k] == kLogZero ? 0.0 : std::exp(occ[k] - log_p);
      dlogits.at(t, k) = std::exp(lp.at(t, k)) - post;
    }
  }
  // Rounding in the log-domain sum can leave log p a hair above 0.
  return logits.tape().Record("ctc_loss", Tensor::Scalar(std::max(0.0, -log_p)), {logits},
                              [logits, dlogits = std::move(dlogits)](ad::Tape& tape,
                                                                     const Tensor& g) {
                                Tensor& gl = tape.MutableGrad(logits);
                                for (std::size_t i = 0; i < gl.size(); ++i) {
                                  gl[i] += g[0] * dlogits[i];
                                }
                              });
}

ad::Var PhraseCeLoss(ad::Var logits, PhraseLabel label) {
  if (logits.value().size() != 2) {
    throw ShapeError("phrase_ce: expected 2 logits, got " + ShapeToString(logits.shape()));
  }
  ad::Var row = logits.shape() == Shape{1, 2} ? logits : ad::Reshape(logits, {1, 2});
  return ad::Scale(ad::Pick(ad::LogSoftmaxRows(row), 0, static_cast<int>(label)), -1.0);
}

ad::Var PhraseCtcLoss(ad::Var logits, PhraseLabel label) {
  if (logits.cols() != 3) {
    throw ShapeError("phrase_ctc: expected T x 3 logits, got " +
                     ShapeToString(logits.shape()));
  }
  const int target[] = {static_cast<int>(label)};
  return CtcLoss(logits, target, kPhraseBlank);
}

ad::Var MtlBatchLoss(std::span<const ad::Var> asr_losses,
                     std::span<const ad::Var> kws_losses, const MtlConfig& cfg) {
  if (asr_losses.empty() && kws_losses.empty()) {
    throw std::invalid_argument("mtl_batch_loss: both loss lists are empty");
  }
  if (cfg.alpha < 0.0) throw std::invalid_argument("mtl_batch_loss: alpha must be >= 0");
  auto mean = [](std::span<const ad::Var> xs) {
    ad::Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = ad::Add(acc, xs[i]);
    return ad::Scale(acc, 1.0 / static_cast<double>(xs.size()));
  };
  if (kws_losses.empty()) return mean(asr_losses);
  ad::Var phrase = ad::Scale(mean(kws_losses), cfg.alpha);
  if (asr_losses.empty()) return phrase;
  return ad::Add(mean(asr_losses), phrase);
}

}  // namespace kws
