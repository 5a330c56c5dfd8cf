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

// Central finite-difference checks for every differentiable op, loss and
// model graph in the library.

#ifndef KWS_GRADCHECK_H_
#define KWS_GRADCHECK_H_

#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/autodiff.h"
#include "kws/tensor.h"

namespace kws::gradcheck {

struct Case {
  std::string name;
  std::string scope;  // "ops", "losses" or "model"
  std::function<std::vector<Tensor>(std::mt19937_64&)> make_inputs;
  // Builds the graph from input leaves. Non-scalar outputs are reduced with
  // a random weighting before differentiation.
  std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)> build;
};

struct Options {
  int seeds = 20;
  double eps = 1e-5;
  double tolerance = 1e-5;
  // Inputs are redrawn until every relu input is at least this far from 0.
  double relu_margin = 1e-3;
};

struct CaseResult {
  std::string name;
  std::string scope;
  int seeds = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct Report {
  std::vector<CaseResult> results;
  bool passed() const;
};

// ||a - n|| / max(||a||, ||n||, 1e-4), the floor keeping analytically-zero
// gradients from dividing rounding noise by zero.
double RelativeError(std::span<const double> analytic, std::span<const double> numeric);

// Every registered case; `scope` is ops, losses, model or all.
std::vector<Case> CasesForScope(std::string_view scope);

// A scale-by-2 op whose backward multiplies by 2.1. Exists so callers can
// confirm the checker catches a broken backward.
Case FaultyCase();

CaseResult Check(const Case& c, const Options& opts = {});
Report Run(std::span<const Case> cases, const Options& opts = {});

}  // namespace kws::gradcheck

#endif  // KWS_GRADCHECK_H_
