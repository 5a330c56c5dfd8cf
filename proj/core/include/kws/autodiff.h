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

// Reverse-mode automatic differentiation on a dynamic tape.
//
// A Tape owns every node created during one forward pass. Nodes are appended
// in creation order, which is a topological order, so Backward() walks the
// tape once from the root down to the first node. Every op checks its output
// for NaN/Inf and throws NumericalError instead of propagating it.

#ifndef KWS_AUTODIFF_H_
#define KWS_AUTODIFF_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kws/tensor.h"

namespace kws::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  // The reference is invalidated when more nodes are recorded on the tape.
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

class Tape {
 public:
  // Called once during Backward() with the node's accumulated output
  // gradient. Must add the local contribution into each parent that
  // requires grad, via AccumulateGrad/MutableGrad.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Leaf(Tensor value, bool requires_grad = true);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }

  // Appends an op result. Throws NumericalError if `value` is not finite.
  Var Record(std::string_view op, Tensor value, std::vector<Var> parents,
             BackwardFn backward);

  // Root must hold exactly one element.
  void Backward(Var root);

  const Tensor& Value(Var v) const { return nodes_[v.id()].value; }
  bool RequiresGrad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradient of the last Backward() root w.r.t. `v`; zeros if unreached.
  Tensor Grad(Var v) const;

  Tensor& MutableGrad(Var v);
  void AccumulateGrad(Var v, const Tensor& g);

  std::size_t size() const { return nodes_.size(); }
  std::string_view OpName(std::int32_t id) const { return nodes_[id].op; }
  std::span<const Var> Parents(std::int32_t id) const { return nodes_[id].parents; }

  // Smallest |input| seen by any relu on the tape; +inf when there is none.
  // Finite-difference checks use it to stay clear of the kink.
  double ReluMargin() const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Matrix ops on rank-2 tensors; rank-1 tensors count as a single row where
// noted.
Var MatMul(Var a, Var b);            // [m,k]x[k,n]
Var MatMulTransposed(Var a, Var b);  // a * b^T, [m,k]x[n,k]
// Same values as MatMul and SoftmaxRows up to rounding, but each reduction
// sums its terms in sorted order. The result then depends only on the
// multiset of terms and is bit-identical when the reduced axis is permuted.
Var MatMulOrderFree(Var a, Var b);
Var SoftmaxRowsOrderFree(Var a);
Var Transpose(Var a);
Var Add(Var a, Var b);  // same shape
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);  // elementwise
Var Scale(Var a, double factor);
Var AddBias(Var a, Var bias);  // [m,n] + [n] on every row
Var Relu(Var a);
Var Sigmoid(Var a);
Var Tanh(Var a);
Var Exp(Var a);
Var Log(Var a);  // NumericalError on non-positive input
Var SoftmaxRows(Var a);
Var LogSoftmaxRows(Var a);
Var LayerNorm(Var a, Var gain, Var bias, double eps = 1e-5);
Var ConcatRows(std::span<const Var> parts);
Var ConcatCols(std::span<const Var> parts);
Var SliceRows(Var a, std::size_t begin, std::size_t end);
Var SliceCols(Var a, std::size_t begin, std::size_t end);
Var Reshape(Var a, Shape shape);
Var LogSumExp(Var a);  // over all elements, returns [1]
Var Sum(Var a);        // returns [1]
Var Pick(Var a, std::size_t row, std::size_t col);  // returns [1]
Var WeightedSum(Var a, const Tensor& weights);      // sum(a .* w), [1]

}  // namespace kws::ad

#endif  // KWS_AUTODIFF_H_
