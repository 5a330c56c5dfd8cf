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

#include "kws/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kws/errors.h"
#include "kws/losses.h"
#include "kws/model.h"

namespace kws::gradcheck {
namespace {

using ad::Tape;
using ad::Var;
using Inputs = std::span<const Var>;

Tensor Uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Values with |x| in [0.1, 1], random sign.
Tensor AwayFromZero(const Shape& shape, std::mt19937_64& rng) {
  Tensor t = Uniform(shape, rng, 0.1, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.data())
    if (flip(rng)) v = -v;
  return t;
}

std::size_t Dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

Case Op(std::string name, std::function<std::vector<Tensor>(std::mt19937_64&)> make,
        std::function<Var(Tape&, Inputs)> build) {
  return {std::move(name), "ops", std::move(make), std::move(build)};
}

std::vector<Case> OpCases() {
  std::vector<Case> cases;
  auto mat = [](std::mt19937_64& rng) { return Shape{Dim(rng, 1, 4), Dim(rng, 1, 5)}; };
  cases.push_back(Op(
      "matmul",
      [](std::mt19937_64& rng) {
        const std::size_t m = Dim(rng, 1, 4), k = Dim(rng, 1, 5), n = Dim(rng, 1, 4);
        return std::vector{Uniform({m, k}, rng), Uniform({k, n}, rng)};
      },
      [](Tape&, Inputs x) { return ad::MatMul(x[0], x[1]); }));
  cases.push_back(Op(
      "matmul_order_free",
      [](std::mt19937_64& rng) {
        const std::size_t m = Dim(rng, 1, 4), k = Dim(rng, 1, 5), n = Dim(rng, 1, 4);
        return std::vector{Uniform({m, k}, rng), Uniform({k, n}, rng)};
      },
      [](Tape&, Inputs x) { return ad::MatMulOrderFree(x[0], x[1]); }));
  cases.push_back(Op(
      "matmul_nt",
      [](std::mt19937_64& rng) {
        const std::size_t m = Dim(rng, 1, 4), k = Dim(rng, 1, 5), n = Dim(rng, 1, 4);
        return std::vector{Uniform({m, k}, rng), Uniform({n, k}, rng)};
      },
      [](Tape&, Inputs x) { return ad::MatMulTransposed(x[0], x[1]); }));
  cases.push_back(Op(
      "transpose", [mat](std::mt19937_64& rng) { return std::vector{Uniform(mat(rng), rng)}; },
      [](Tape&, Inputs x) { return ad::Transpose(x[0]); }));
  auto binary = [mat](std::string name, Var (*fn)(Var, Var)) {
    return Op(
        std::move(name),
        [mat](std::mt19937_64& rng) {
          const Shape s = mat(rng);
          return std::vector{Uniform(s, rng), Uniform(s, rng)};
        },
        [fn](Tape&, Inputs x) { return fn(x[0], x[1]); });
  };
  cases.push_back(binary("add", &ad::Add));
  cases.push_back(binary("sub", &ad::Sub));
  cases.push_back(binary("mul", &ad::Mul));
  cases.push_back(Op(
      "scale", [mat](std::mt19937_64& rng) { return std::vector{Uniform(mat(rng), rng)}; },
      [](Tape&, Inputs x) { return ad::Scale(x[0], -1.7); }));
  cases.push_back(Op(
      "add_bias",
      [mat](std::mt19937_64& rng) {
        const Shape s = mat(rng);
        return std::vector{Uniform(s, rng), Uniform({s[1]}, rng)};
      },
      [](Tape&, Inputs x) { return ad::AddBias(x[0], x[1]); }));
  auto unary = [mat](std::string name, Var (*fn)(Var), double lo, double hi) {
    return Op(
        std::move(name),
        [mat, lo, hi](std::mt19937_64& rng) { return std::vector{Uniform(mat(rng), rng, lo, hi)}; },
        [fn](Tape&, Inputs x) { return fn(x[0]); });
  };
  cases.push_back(Op(
      "relu", [mat](std::mt19937_64& rng) { return std::vector{AwayFromZero(mat(rng), rng)}; },
      [](Tape&, Inputs x) { return ad::Relu(x[0]); }));
  cases.push_back(unary("sigmoid", &ad::Sigmoid, -3.0, 3.0));
  cases.push_back(unary("tanh", &ad::Tanh, -2.0, 2.0));
  cases.push_back(unary("exp", &ad::Exp, -2.0, 2.0));
  cases.push_back(unary("log", &ad::Log, 0.5, 2.0));
  cases.push_back(unary("softmax_rows", &ad::SoftmaxRows, -2.0, 2.0));
  cases.push_back(unary("softmax_rows_order_free", &ad::SoftmaxRowsOrderFree, -2.0, 2.0));
  cases.push_back(unary("log_softmax_rows", &ad::LogSoftmaxRows, -2.0, 2.0));
  cases.push_back(Op(
      "layer_norm",
      [](std::mt19937_64& rng) {
        const std::size_t m = Dim(rng, 1, 4), d = Dim(rng, 2, 8);
        return std::vector{Uniform({m, d}, rng, -2.0, 2.0), Uniform({d}, rng, 0.5, 1.5),
                           Uniform({d}, rng)};
      },
      [](Tape&, Inputs x) { return ad::LayerNorm(x[0], x[1], x[2]); }));
  cases.push_back(Op(
      "concat_rows",
      [](std::mt19937_64& rng) {
        const std::size_t n = Dim(rng, 1, 4);
        return std::vector{Uniform({Dim(rng, 1, 3), n}, rng), Uniform({Dim(rng, 1, 3), n}, rng)};
      },
      [](Tape&, Inputs x) { return ad::ConcatRows(x); }));
  cases.push_back(Op(
      "concat_cols",
      [](std::mt19937_64& rng) {
        const std::size_t m = Dim(rng, 1, 4);
        return std::vector{Uniform({m, Dim(rng, 1, 3)}, rng), Uniform({m, Dim(rng, 1, 3)}, rng)};
      },
      [](Tape&, Inputs x) { return ad::ConcatCols(x); }));
  cases.push_back(Op(
      "slice_rows", [](std::mt19937_64& rng) { return std::vector{Uniform({4, 3}, rng)}; },
      [](Tape&, Inputs x) { return ad::SliceRows(x[0], 1, 3); }));
  cases.push_back(Op(
      "slice_cols", [](std::mt19937_64& rng) { return std::vector{Uniform({3, 5}, rng)}; },
      [](Tape&, Inputs x) { return ad::SliceCols(x[0], 2, 5); }));
  cases.push_back(Op(
      "reshape", [](std::mt19937_64& rng) { return std::vector{Uniform({2, 6}, rng)}; },
      [](Tape&, Inputs x) { return ad::Reshape(x[0], {3, 4}); }));
  cases.push_back(unary("log_sum_exp", &ad::LogSumExp, -3.0, 3.0));
  cases.push_back(unary("sum", &ad::Sum, -1.0, 1.0));
  cases.push_back(Op(
      "pick", [](std::mt19937_64& rng) { return std::vector{Uniform({3, 4}, rng)}; },
      [](Tape&, Inputs x) { return ad::Pick(x[0], 2, 1); }));
  cases.push_back(Op(
      "weighted_sum", [](std::mt19937_64& rng) { return std::vector{Uniform({2, 3}, rng)}; },
      [](Tape&, Inputs x) {
        return ad::WeightedSum(x[0], Tensor::Matrix(2, 3, {0.5, -1, 2, 0.25, 3, -0.75}));
      }));
  return cases;
}

std::vector<int> RandomLabels(std::mt19937_64& rng, std::size_t frames, int classes, int blank,
                              std::size_t max_len) {
  std::vector<int> labels;
  const std::size_t len = Dim(rng, 1, max_len);
  for (std::size_t i = 0; i < len; ++i) {
    int l;
    do {
      l = std::uniform_int_distribution<int>(0, classes - 1)(rng);
    } while (l == blank);
    labels.push_back(l);
    if (CtcMinFrames(labels) > frames) {
      labels.pop_back();
      break;
    }
  }
  return labels;
}

std::vector<Case> LossCases() {
  std::vector<Case> cases;
  {
    auto labels = std::make_shared<std::vector<int>>();
    cases.push_back({"ctc_loss", "losses",
                     [labels](std::mt19937_64& rng) {
                       const std::size_t T = Dim(rng, 2, 6);
                       const int C = static_cast<int>(Dim(rng, 2, 5));
                       *labels = RandomLabels(rng, T, C, C - 1, 3);
                       return std::vector{Uniform({T, static_cast<std::size_t>(C)}, rng, -2, 2)};
                     },
                     [labels](Tape&, Inputs x) {
                       return CtcLoss(x[0], *labels, static_cast<int>(x[0].cols()) - 1);
                     }});
  }
  {
    auto label = std::make_shared<PhraseLabel>();
    cases.push_back({"phrase_ce_loss", "losses",
                     [label](std::mt19937_64& rng) {
                       *label = std::bernoulli_distribution(0.5)(rng) ? PhraseLabel::kPositive
                                                                      : PhraseLabel::kNegative;
                       return std::vector{Uniform({2}, rng, -3, 3)};
                     },
                     [label](Tape&, Inputs x) { return PhraseCeLoss(x[0], *label); }});
  }
  {
    auto label = std::make_shared<PhraseLabel>();
    cases.push_back({"phrase_ctc_loss", "losses",
                     [label](std::mt19937_64& rng) {
                       *label = std::bernoulli_distribution(0.5)(rng) ? PhraseLabel::kPositive
                                                                      : PhraseLabel::kNegative;
                       return std::vector{Uniform({Dim(rng, 1, 6), 3}, rng, -2, 2)};
                     },
                     [label](Tape&, Inputs x) { return PhraseCtcLoss(x[0], *label); }});
  }
  {
    struct State {
      std::vector<std::vector<int>> phones;
      std::vector<PhraseLabel> phrases;
      double alpha = 1.0;
    };
    auto st = std::make_shared<State>();
    cases.push_back({"mtl_batch_loss", "losses",
                     [st](std::mt19937_64& rng) {
                       std::vector<Tensor> in;
                       st->phones.clear();
                       st->phrases.clear();
                       st->alpha = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
                       for (std::size_t i = 0, n = Dim(rng, 1, 3); i < n; ++i) {
                         const std::size_t T = Dim(rng, 2, 5);
                         st->phones.push_back(RandomLabels(rng, T, 4, 3, 2));
                         in.push_back(Uniform({T, 4}, rng, -2, 2));
                       }
                       for (std::size_t i = 0, n = Dim(rng, 1, 3); i < n; ++i) {
                         st->phrases.push_back(std::bernoulli_distribution(0.5)(rng)
                                                   ? PhraseLabel::kPositive
                                                   : PhraseLabel::kNegative);
                         in.push_back(Uniform({2}, rng, -2, 2));
                       }
                       return in;
                     },
                     [st](Tape&, Inputs x) {
                       std::vector<Var> asr, kws;
                       for (std::size_t i = 0; i < st->phones.size(); ++i) {
                         asr.push_back(CtcLoss(x[i], st->phones[i], 3));
                       }
                       for (std::size_t i = 0; i < st->phrases.size(); ++i) {
                         kws.push_back(PhraseCeLoss(x[st->phones.size() + i], st->phrases[i]));
                       }
                       return MtlBatchLoss(asr, kws, MtlConfig{st->alpha});
                     }});
  }
  return cases;
}

ModelConfig TinyConfig(TrainMode mode) {
  ModelConfig c;
  c.mode = mode;
  c.encoder = {.n_blocks = 2, .d_model = 8, .n_heads = 2, .d_ff = 12, .n_phone_logits = 5,
               .input_dim = 6};
  c.xattn = {.n_blocks = 1, .d_query = 8, .query_len = 3, .n_heads = 2, .d_ff = 12,
             .n_phrase_logits = 2};
  c.blstm = {.hidden = 4};
  return c;
}

// Inputs are [features, params...] in ParamShapes order; layer-norm params
// are jittered so their gradients are exercised away from the identity.
std::vector<Tensor> ModelInputs(const ModelConfig& cfg, std::mt19937_64& rng,
                                std::size_t frames) {
  std::vector<Tensor> in{Uniform({frames, static_cast<std::size_t>(cfg.encoder.input_dim)}, rng)};
  const ModelParams params = InitParams(cfg, rng());
  for (const auto& [name, t] : params.tensors()) {
    Tensor v = t;
    if (name.find(".ln") != std::string::npos) {
      for (double& x : v.data()) x += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    }
    in.push_back(std::move(v));
  }
  return in;
}

Case ModelCase(std::string name, TrainMode mode) {
  const ModelConfig cfg = TinyConfig(mode);
  std::vector<std::string> names;
  for (const auto& [n, _] : ParamShapes(cfg)) names.push_back(n);
  auto labels = std::make_shared<std::vector<int>>();
  auto phrase = std::make_shared<PhraseLabel>();
  return {std::move(name), "model",
          [cfg, labels, phrase](std::mt19937_64& rng) {
            const std::size_t T = Dim(rng, 2, 4);
            *labels = RandomLabels(rng, T, cfg.encoder.n_phone_logits,
                                   cfg.encoder.n_phone_logits - 1, 2);
            *phrase = std::bernoulli_distribution(0.5)(rng) ? PhraseLabel::kPositive
                                                            : PhraseLabel::kNegative;
            return ModelInputs(cfg, rng, T);
          },
          [cfg, names, labels, phrase](Tape& tape, Inputs x) {
            ModelParams empty;
            BoundParams p(tape, empty);
            for (std::size_t i = 0; i < names.size(); ++i) p.Bind(names[i], x[i + 1]);
            const EncoderOutput enc = Encode(p, x[0], cfg.encoder);
            switch (cfg.mode) {
              case TrainMode::kPhonemeOnly:
                return CtcLoss(enc.phone_logits, *labels, cfg.encoder.n_phone_logits - 1);
              case TrainMode::kConvMtl:
                return PhraseCtcLoss(SplitBranchHead(p, enc), *phrase);
              case TrainMode::kBlstmMtl:
                return PhraseCeLoss(BlstmHead(p, enc), *phrase);
              case TrainMode::kXattnMtl:
                return PhraseCeLoss(CrossAttentionHead(p, enc, cfg.xattn), *phrase);
            }
            throw ConfigError("unknown mode");
          }};
}

std::vector<Case> ModelCases() {
  std::vector<Case> cases;
  cases.push_back({"attention", "model",
                   [](std::mt19937_64& rng) {
                     const std::size_t m = Dim(rng, 1, 3), n = Dim(rng, 1, 4), d = Dim(rng, 1, 4);
                     return std::vector{Uniform({m, d}, rng), Uniform({n, d}, rng),
                                        Uniform({n, Dim(rng, 1, 3)}, rng)};
                   },
                   [](Tape&, Inputs x) { return Attention(x[0], x[1], x[2]); }});
  {
    const std::vector<std::string> names = {"mha.bk", "mha.bo", "mha.bq", "mha.bv",
                                            "mha.wk", "mha.wo", "mha.wq", "mha.wv"};
    cases.push_back({"multi_head_attention", "model",
                     [](std::mt19937_64& rng) {
                       std::vector<Tensor> in{Uniform({3, 8}, rng), Uniform({2, 8}, rng)};
                       for (int i = 0; i < 4; ++i) in.push_back(Uniform({8}, rng, -0.3, 0.3));
                       for (int i = 0; i < 4; ++i) in.push_back(Uniform({8, 8}, rng, -0.5, 0.5));
                       return in;
                     },
                     [names](Tape& tape, Inputs x) {
                       ModelParams empty;
                       BoundParams p(tape, empty);
                       for (std::size_t i = 0; i < names.size(); ++i) p.Bind(names[i], x[i + 2]);
                       // Self attention on 3 frames, then cross attention from 2 queries.
                       Var self = MultiHeadAttention(p, "mha", x[0], x[0], x[0], 2);
                       Var cross = MultiHeadAttention(p, "mha", x[1], self, self, 2);
                       return ad::ConcatRows(std::vector<Var>{self, cross});
                     }});
  }
  cases.push_back(ModelCase("encoder_phone_ctc", TrainMode::kPhonemeOnly));
  cases.push_back(ModelCase("encoder_split_branch_phrase_ctc", TrainMode::kConvMtl));
  cases.push_back(ModelCase("encoder_blstm_phrase_ce", TrainMode::kBlstmMtl));
  cases.push_back(ModelCase("encoder_cross_attention_phrase_ce", TrainMode::kXattnMtl));
  return cases;
}

}  // namespace

bool Report::passed() const {
  return std::all_of(results.begin(), results.end(),
                     [](const CaseResult& r) { return r.passed; });
}

double RelativeError(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-4});
}

std::vector<Case> CasesForScope(std::string_view scope) {
  std::vector<Case> out;
  const bool all = scope == "all";
  if (!all && scope != "ops" && scope != "losses" && scope != "model") {
    throw ConfigError("grad-check scope must be ops, losses, model or all");
  }
  if (all || scope == "ops") {
    auto c = OpCases();
    out.insert(out.end(), c.begin(), c.end());
  }
  if (all || scope == "losses") {
    auto c = LossCases();
    out.insert(out.end(), c.begin(), c.end());
  }
  if (all || scope == "model") {
    auto c = ModelCases();
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

Case FaultyCase() {
  return {"faulty_scale", "ops",
          [](std::mt19937_64& rng) { return std::vector{Uniform({2, 3}, rng)}; },
          [](Tape& tape, Inputs x) {
            Tensor out = x[0].value();
            for (double& v : out.data()) v *= 2.0;
            Var a = x[0];
            return tape.Record("faulty_scale", std::move(out), {a},
                               [a](Tape& t, const Tensor& g) {
                                 Tensor& ga = t.MutableGrad(a);
                                 for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.1 * g[i];
                               });
          }};
}

CaseResult Check(const Case& c, const Options& opts) {
  CaseResult res{c.name, c.scope, 0, 0.0, true};
  std::mt19937_64 rng(Fnv1a(c.name));
  for (int seed = 0; seed < opts.seeds; ++seed) {
    std::vector<Tensor> inputs;
    Tensor weights;
    bool scalar = true;
    for (int attempt = 0;; ++attempt) {
      inputs = c.make_inputs(rng);
      Tape probe;
      std::vector<Var> leaves;
      for (const Tensor& t : inputs) leaves.push_back(probe.Leaf(t));
      Var out = c.build(probe, leaves);
      scalar = out.value().size() == 1;
      if (!scalar) weights = Uniform(out.shape(), rng);
      if (probe.ReluMargin() >= opts.relu_margin) break;
      if (attempt == 100) throw NumericalError(c.name + ": could not avoid relu kinks");
    }
    auto evaluate = [&](bool backward, std::vector<Tensor>* grads) {
      Tape tape;
      std::vector<Var> leaves;
      for (const Tensor& t : inputs) leaves.push_back(tape.Leaf(t));
      Var out = c.build(tape, leaves);
      Var root = scalar ? out : ad::WeightedSum(out, weights);
      if (backward) {
        tape.Backward(root);
        for (Var l : leaves) grads->push_back(tape.Grad(l));
      }
      return root.value()[0];
    };
    std::vector<Tensor> analytic;
    evaluate(true, &analytic);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      std::vector<double> numeric(inputs[i].size());
      for (std::size_t j = 0; j < inputs[i].size(); ++j) {
        const double orig = inputs[i][j];
        inputs[i][j] = orig + opts.eps;
        const double fp = evaluate(false, nullptr);
        inputs[i][j] = orig - opts.eps;
        const double fm = evaluate(false, nullptr);
        inputs[i][j] = orig;
        numeric[j] = (fp - fm) / (2.0 * opts.eps);
      }
      res.max_rel_error = std::max(res.max_rel_error, RelativeError(analytic[i].data(), numeric));
    }
    ++res.seeds;
  }
  res.passed = res.max_rel_error < opts.tolerance;
  return res;
}

Report Run(std::span<const Case> cases, const Options& opts) {
  Report r;
  for (const Case& c : cases) r.results.push_back(Check(c, opts));
  return r;
}

}  // namespace kws::gradcheck
