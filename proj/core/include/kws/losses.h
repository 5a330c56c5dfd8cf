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

#ifndef KWS_LOSSES_H_
#define KWS_LOSSES_H_

#include <span>
#include <vector>

#include "kws/autodiff.h"
#include "kws/tensor.h"

namespace kws {

// 53 phone classes plus blank, as emitted by the phonetic branch.
inline constexpr int kNumPhones = 53;
inline constexpr int kPhoneBlank = 53;
inline constexpr int kNumPhoneLogits = 54;

// Phrase-level classes. The two-logit heads emit [positive, negative]; the
// split-branch head adds a blank at index 2 for phrase CTC.
enum class PhraseLabel : int { kPositive = 0, kNegative = 1 };
inline constexpr int kPhraseBlank = 2;

struct MtlConfig {
  double alpha = 10.0;
};

// Frames needed to emit `labels` under CTC: one per label plus one blank
// between each pair of equal neighbours.
std::size_t CtcMinFrames(std::span<const int> labels);

// log p(labels | x) by the CTC forward recursion. `log_probs` is T x C and
// must already be row-normalized in the log domain.
double CtcLogProb(const Tensor& log_probs, std::span<const int> labels, int blank);

// -log p(labels | softmax(logits)). Throws NumericalError when the labels
// cannot be aligned to the available frames.
ad::Var CtcLoss(ad::Var logits, std::span<const int> labels, int blank);

ad::Var PhraseCeLoss(ad::Var logits, PhraseLabel label);
ad::Var PhraseCtcLoss(ad::Var logits, PhraseLabel label);

// mean(asr) + alpha * mean(kws). An empty list drops its term.
ad::Var MtlBatchLoss(std::span<const ad::Var> asr_losses,
                     std::span<const ad::Var> kws_losses, const MtlConfig& cfg);

}  // namespace kws

#endif  // KWS_LOSSES_H_
