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

#include "kws/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "kws/errors.h"

namespace kws::ad {
namespace {

void RequireRank2(Var a, std::string_view op) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + " expects a matrix, got " +
                     ShapeToString(a.shape()));
  }
}

void RequireSameShape(Var a, Var b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
}

// Sum of `terms` in ascending order; reorders `terms`.
double SortedSum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double v : terms) s += v;
  return s;
}

// c[m,n] += a[m,k] * b[k,n]
void GemmAcc(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T
void GemmNTAcc(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void GemmTNAcc(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Var Unary(std::string_view op, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return a.tape().Record(op, std::move(out), {a},
                         [a, deriv](Tape& t, const Tensor& g) {
                           const Tensor& x = t.Value(a);
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             ga[i] += g[i] * deriv(x[i]);
                           }
                         });
}

}  // namespace

const Tensor& Var::value() const { return tape_->Value(*this); }

Var Tape::Leaf(Tensor value, bool requires_grad) {
  if (!value.AllFinite()) throw NumericalError("non-finite leaf value");
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Var Tape::Record(std::string_view op, Tensor value, std::vector<Var> parents,
                 BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericalError("op '" + std::string(op) + "' produced a non-finite value");
  }
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(), [this](Var p) {
    return nodes_[p.id()].requires_grad;
  });
  if (n.requires_grad) n.backward = std::move(backward);
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

Tensor& Tape::MutableGrad(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::AccumulateGrad(Var v, const Tensor& g) {
  if (!nodes_[v.id()].requires_grad) return;
  Tensor& dst = MutableGrad(v);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Tensor Tape::Grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

void Tape::Backward(Var root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward root must be scalar, got " +
                     ShapeToString(root.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  MutableGrad(root)[0] = 1.0;
  for (std::int32_t id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (std::isnan(n.grad[i])) {
        throw NumericalError("NaN gradient at op '" + n.op + "'");
      }
    }
  }
}

double Tape::ReluMargin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op != "relu") continue;
    for (double v : nodes_[n.parents[0].id()].value.data()) {
      margin = std::min(margin, std::abs(v));
    }
  }
  return margin;
}

Var MatMul(Var a, Var b) {
  RequireRank2(a, "matmul");
  RequireRank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     ShapeToString(a.shape()) + " x " + ShapeToString(b.shape()));
  }
  Tensor out({m, n});
  GemmAcc(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  return a.tape().Record("matmul", std::move(out), {a, b},
                         [a, b, m, k, n](Tape& t, const Tensor& g) {
                           if (t.RequiresGrad(a)) {
                             GemmNTAcc(g.data().data(), t.Value(b).data().data(),
                                       t.MutableGrad(a).data().data(), m, n, k);
                           }
                           if (t.RequiresGrad(b)) {
                             GemmTNAcc(t.Value(a).data().data(), g.data().data(),
                                       t.MutableGrad(b).data().data(), m, k, n);
                           }
                         });
}

Var MatMulTransposed(Var a, Var b) {
  RequireRank2(a, "matmul_nt");
  RequireRank2(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions disagree, " +
                     ShapeToString(a.shape()) + " x " + ShapeToString(b.shape()) + "^T");
  }
  Tensor out({m, n});
  GemmNTAcc(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  return a.tape().Record("matmul_nt", std::move(out), {a, b},
                         [a, b, m, k, n](Tape& t, const Tensor& g) {
                           // dA = G B, dB = G^T A
                           if (t.RequiresGrad(a)) {
                             GemmAcc(g.data().data(), t.Value(b).data().data(),
                                     t.MutableGrad(a).data().data(), m, n, k);
                           }
                           if (t.RequiresGrad(b)) {
                             GemmTNAcc(g.data().data(), t.Value(a).data().data(),
                                       t.MutableGrad(b).data().data(), m, n, k);
                           }
                         });
}

Var MatMulOrderFree(Var a, Var b) {
  RequireRank2(a, "matmul_order_free");
  RequireRank2(b, "matmul_order_free");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul_order_free: inner dimensions disagree, " +
                     ShapeToString(a.shape()) + " x " + ShapeToString(b.shape()));
  }
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out({m, n});
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) terms[p] = x.at(i, p) * y.at(p, j);
      out.at(i, j) = SortedSum(terms);
    }
  }
  return a.tape().Record("matmul_order_free", std::move(out), {a, b},
                         [a, b, m, k, n](Tape& t, const Tensor& g) {
                           if (t.RequiresGrad(a)) {
                             GemmNTAcc(g.data().data(), t.Value(b).data().data(),
                                       t.MutableGrad(a).data().data(), m, n, k);
                           }
                           if (t.RequiresGrad(b)) {
                             GemmTNAcc(t.Value(a).data().data(), g.data().data(),
                                       t.MutableGrad(b).data().data(), m, k, n);
                           }
                         });
}

Var Transpose(Var a) {
  RequireRank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  const Tensor& x = a.value();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
  return a.tape().Record("transpose", std::move(out), {a},
                         [a, m, n](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
                         });
}

Var Add(Var a, Var b) {
  RequireSameShape(a, b, "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape().Record("add", std::move(out), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           t.AccumulateGrad(a, g);
                           t.AccumulateGrad(b, g);
                         });
}

Var Sub(Var a, Var b) {
  RequireSameShape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape().Record("sub", std::move(out), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           t.AccumulateGrad(a, g);
                           if (t.RequiresGrad(b)) {
                             Tensor& gb = t.MutableGrad(b);
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                           }
                         });
}

Var Mul(Var a, Var b) {
  RequireSameShape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape().Record("mul", std::move(out), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           const Tensor& x = t.Value(a);
                           const Tensor& y = t.Value(b);
                           if (t.RequiresGrad(a)) {
                             Tensor& ga = t.MutableGrad(a);
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                           }
                           if (t.RequiresGrad(b)) {
                             Tensor& gb = t.MutableGrad(b);
                             for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                           }
                         });
}

Var Scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().Record("scale", std::move(out), {a},
                         [a, factor](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
                         });
}

Var AddBias(Var a, Var bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.value().size() != n) {
    throw ShapeError("add_bias: bias " + ShapeToString(bias.shape()) +
                     " does not match rows of " + ShapeToString(a.shape()));
  }
  Tensor out = a.value();
  const Tensor& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b[j];
  return a.tape().Record("add_bias", std::move(out), {a, bias},
                         [a, bias, m, n](Tape& t, const Tensor& g) {
                           t.AccumulateGrad(a, g);
                           if (t.RequiresGrad(bias)) {
                             Tensor& gb = t.MutableGrad(bias);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) gb[j] += g.at(i, j);
                           }
                         });
}

Var Relu(Var a) {
  return Unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Sigmoid(Var a) {
  auto sig = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return Unary("sigmoid", a, sig, [sig](double x) {
    const double s = sig(x);
    return s * (1.0 - s);
  });
}

Var Tanh(Var a) {
  return Unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var Exp(Var a) {
  return Unary("exp", a, [](double x) { return std::exp(x); },
               [](double x) { return std::exp(x); });
}

Var Log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value " + std::to_string(v));
  }
  return Unary("log", a, [](double x) { return std::log(x); },
               [](double x) { return 1.0 / x; });
}

Var SoftmaxRows(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) z += (v = std::exp(v - mx));
    for (double& v : r) v /= z;
  }
  Tensor y = out;
  return a.tape().Record("softmax_rows", std::move(out), {a},
                         [a, m, n, y = std::move(y)](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < m; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += y.at(i, j) * g.at(i, j);
                             for (std::size_t j = 0; j < n; ++j) {
                               ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                             }
                           }
                         });
}

Var SoftmaxRowsOrderFree(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a.value();
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    for (double& v : r) v = std::exp(v - mx);
    std::copy(r.begin(), r.end(), terms.begin());
    const double z = SortedSum(terms);
    for (double& v : r) v /= z;
  }
  Tensor y = out;
  return a.tape().Record("softmax_rows_order_free", std::move(out), {a},
                         [a, m, n, y = std::move(y)](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < m; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += y.at(i, j) * g.at(i, j);
                             for (std::size_t j = 0; j < n; ++j) {
                               ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                             }
                           }
                         });
}

Var LogSoftmaxRows(Var a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double lz = mx + std::log(z);
    for (double& v : r) v -= lz;
  }
  Tensor probs = out;
  for (double& v : probs.data()) v = std::exp(v);
  return a.tape().Record("log_softmax_rows", std::move(out), {a},
                         [a, m, n, probs = std::move(probs)](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < m; ++i) {
                             double gs = 0.0;
                             for (std::size_t j = 0; j < n; ++j) gs += g.at(i, j);
                             for (std::size_t j = 0; j < n; ++j) {
                               ga.at(i, j) += g.at(i, j) - probs.at(i, j) * gs;
                             }
                           }
                         });
}

Var LayerNorm(Var a, Var gain, Var bias, double eps) {
  const std::size_t m = a.rows(), d = a.cols();
  if (d == 0) throw ShapeError("layer_norm: empty rows");
  if (gain.value().size() != d || bias.value().size() != d) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " elements");
  }
  const Tensor& x = a.value();
  Tensor xhat({m, d});
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) xhat.at(i, j) = (r[j] - mean) * inv_std[i];
  }
  Tensor out({m, d});
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = gv[j] * xhat.at(i, j) + bv[j];
  return a.tape().Record(
      "layer_norm", std::move(out), {a, gain, bias},
      [a, gain, bias, m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, const Tensor& g) {
        const Tensor& gv = t.Value(gain);
        if (t.RequiresGrad(gain)) {
          Tensor& gg = t.MutableGrad(gain);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g.at(i, j) * xhat.at(i, j);
        }
        if (t.RequiresGrad(bias)) {
          Tensor& gb = t.MutableGrad(bias);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g.at(i, j);
        }
        if (t.RequiresGrad(a)) {
          Tensor& ga = t.MutableGrad(a);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t i = 0; i < m; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = g.at(i, j) * gv[j];
              s1 += dy;
              s2 += dy * xhat.at(i, j);
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = g.at(i, j) * gv[j];
              ga.at(i, j) += inv_std[i] * (dy - inv_d * s1 - xhat.at(i, j) * inv_d * s2);
            }
          }
        }
      });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (Var p : parts) {
    RequireRank2(p, "concat_rows");
    if (p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + ShapeToString(parts[0].shape()) +
                       " vs " + ShapeToString(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> data;
  data.reserve(m * n);
  for (Var p : parts) {
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return parts[0].tape().Record("concat_rows", Tensor({m, n}, std::move(data)), parents,
                                [parents](Tape& t, const Tensor& g) {
                                  std::size_t off = 0;
                                  for (Var p : parents) {
                                    const std::size_t len = p.value().size();
                                    if (t.RequiresGrad(p)) {
                                      Tensor& gp = t.MutableGrad(p);
                                      for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
                                    }
                                    off += len;
                                  }
                                });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (Var p : parts) {
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + ShapeToString(parts[0].shape()) +
                       " vs " + ShapeToString(p.shape()));
    }
    n += p.cols();
  }
  Tensor out({m, n});
  std::size_t col = 0;
  for (Var p : parts) {
    const Tensor& x = p.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, col + j) = x.at(i, j);
    col += x.cols();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return parts[0].tape().Record("concat_cols", std::move(out), parents,
                                [parents, m](Tape& t, const Tensor& g) {
                                  std::size_t col = 0;
                                  for (Var p : parents) {
                                    const std::size_t w = p.cols();
                                    if (t.RequiresGrad(p)) {
                                      Tensor& gp = t.MutableGrad(p);
                                      for (std::size_t i = 0; i < m; ++i)
                                        for (std::size_t j = 0; j < w; ++j)
                                          gp[i * w + j] += g.at(i, col + j);
                                    }
                                    col += w;
                                  }
                                });
}

Var SliceRows(Var a, std::size_t begin, std::size_t end) {
  RequireRank2(a, "slice_rows");
  if (begin >= end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for " + ShapeToString(a.shape()));
  }
  const std::size_t n = a.cols();
  auto src = a.value().data();
  std::vector<double> data(src.begin() + begin * n, src.begin() + end * n);
  return a.tape().Record("slice_rows", Tensor({end - begin, n}, std::move(data)), {a},
                         [a, begin, n](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
                         });
}

Var SliceCols(Var a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for " + ShapeToString(a.shape()));
  }
  const std::size_t m = a.rows(), w = end - begin;
  const Tensor& x = a.value();
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = x.at(i, begin + j);
  return a.tape().Record("slice_cols", std::move(out), {a},
                         [a, begin, m, w](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           const std::size_t n = ga.cols();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                               ga[i * n + begin + j] += g.at(i, j);
                         });
}

Var Reshape(Var a, Shape shape) {
  Tensor out = a.value().Reshaped(std::move(shape));
  return a.tape().Record("reshape", std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.MutableGrad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var LogSumExp(Var a) {
  auto x = a.value().data();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return a.tape().Record("log_sum_exp", Tensor::Scalar(lse), {a},
                         [a, lse](Tape& t, const Tensor& g) {
                           const Tensor& x = t.Value(a);
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < x.size(); ++i) {
                             ga[i] += g[0] * std::exp(x[i] - lse);
                           }
                         });
}

Var Sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().Record("sum", Tensor::Scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.MutableGrad(a);
    for (double& v : ga.data()) v += g[0];
  });
}

Var Pick(Var a, std::size_t row, std::size_t col) {
  if (row >= a.rows() || col >= a.cols()) {
    throw ShapeError("pick: (" + std::to_string(row) + "," + std::to_string(col) +
                     ") out of range for " + ShapeToString(a.shape()));
  }
  const std::size_t idx = row * a.cols() + col;
  return a.tape().Record("pick", Tensor::Scalar(a.value()[idx]), {a},
                         [a, idx](Tape& t, const Tensor& g) { t.MutableGrad(a)[idx] += g[0]; });
}

Var WeightedSum(Var a, const Tensor& weights) {
  if (weights.size() != a.value().size()) {
    throw ShapeError("weighted_sum: weights " + ShapeToString(weights.shape()) +
                     " vs value " + ShapeToString(a.shape()));
  }
  double s = 0.0;
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * weights[i];
  return a.tape().Record("weighted_sum", Tensor::Scalar(s), {a},
                         [a, weights](Tape& t, const Tensor& g) {
                           Tensor& ga = t.MutableGrad(a);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * weights[i];
                         });
}

}  // namespace kws::ad
