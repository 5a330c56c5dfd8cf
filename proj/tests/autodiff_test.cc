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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "kws/autodiff.h"
#include "kws/errors.h"
#include "kws/gradcheck.h"
#include "kws/tensor.h"

namespace kws::ad {
namespace {

Tensor RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t({r, c});
  for (double& v : t.data()) v = u(rng);
  return t;
}

TEST_CASE("tensor rejects zero dimensions and mismatched data") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor t = Tensor::Matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.at(1, 2) == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.Reshaped({3, 2}).at(2, 1) == 6);
  CHECK_THROWS_AS(t.Reshaped({4, 2}), ShapeError);
}

TEST_CASE("matmul identity and scalar product") {
  Tape tape;
  Var eye = tape.Leaf(Tensor::Matrix(2, 2, {1, 0, 0, 1}));
  Var col = tape.Leaf(Tensor::Matrix(2, 1, {3, 4}));
  CHECK(MatMul(eye, col).value() == Tensor::Matrix(2, 1, {3, 4}));

  Var a = tape.Leaf(Tensor::Matrix(1, 1, {2}));
  Var b = tape.Leaf(Tensor::Matrix(1, 1, {3}));
  Var out = MatMul(a, b);
  CHECK(out.value()[0] == 6);
  tape.Backward(out);
  CHECK(tape.Grad(a)[0] == 3);
  CHECK(tape.Grad(b)[0] == 2);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  Var a = tape.Leaf(Tensor({2, 3}));
  Var b = tape.Leaf(Tensor({2, 3}));
  try {
    MatMul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax rows are normalized and stable") {
  Tape tape;
  Var s = SoftmaxRows(tape.Leaf(Tensor::Matrix(2, 2, {0, 0, 1000, 0})));
  CHECK(s.value().at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(s.value().at(1, 0) - 1.0) < 1e-12);
  CHECK(std::abs(s.value().at(1, 1)) < 1e-12);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = RandomMatrix(3, 7, rng);
    for (double& v : x.data()) v *= 50.0;
    Var y = SoftmaxRows(tape.Leaf(x));
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (double v : y.value().row(r)) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("order-free reductions ignore the order of their terms") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = RandomMatrix(3, 6, rng), b = RandomMatrix(6, 4, rng);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor pa({3, 6}), pb({6, 4});
    for (std::size_t k = 0; k < 6; ++k) {
      for (std::size_t i = 0; i < 3; ++i) pa.at(i, k) = a.at(i, perm[k]);
      for (std::size_t j = 0; j < 4; ++j) pb.at(k, j) = b.at(perm[k], j);
    }
    Tape tape;
    const Tensor plain = MatMul(tape.Leaf(a), tape.Leaf(b)).value();
    const Tensor ref = MatMulOrderFree(tape.Leaf(a), tape.Leaf(b)).value();
    const Tensor permuted = MatMulOrderFree(tape.Leaf(pa), tape.Leaf(pb)).value();
    CHECK(ref == permuted);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ref[i] - plain[i]) < 1e-12);

    const Tensor soft = SoftmaxRowsOrderFree(tape.Leaf(a)).value();
    const Tensor soft_p = SoftmaxRowsOrderFree(tape.Leaf(pa)).value();
    const Tensor soft_plain = SoftmaxRows(tape.Leaf(a)).value();
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(soft.at(i, perm[k]) == soft_p.at(i, k));
        CHECK(std::abs(soft.at(i, k) - soft_plain.at(i, k)) < 1e-12);
      }
    }
  }
}

TEST_CASE("layer norm examples") {
  Tape tape;
  Var gain = tape.Leaf(Tensor::Vector({1, 1}));
  Var bias = tape.Leaf(Tensor::Vector({0, 0}));
  Var c = LayerNorm(tape.Leaf(Tensor::Matrix(1, 2, {5, 5})), gain, bias);
  CHECK(c.value().at(0, 0) == 0.0);
  CHECK(c.value().at(0, 1) == 0.0);
  Var two = LayerNorm(tape.Leaf(Tensor::Matrix(1, 2, {1, 3})), gain, bias, 1e-14);
  CHECK(two.value().at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(two.value().at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("relu forward and mask") {
  Tape tape;
  Var x = tape.Leaf(Tensor::Vector({-1, 2}));
  Var y = Relu(x);
  CHECK(y.value() == Tensor::Vector({0, 2}));
  tape.Backward(Sum(y));
  CHECK(tape.Grad(x) == Tensor::Vector({0, 1}));
}

TEST_CASE("log sum exp is overflow safe") {
  Tape tape;
  Var y = LogSumExp(tape.Leaf(Tensor::Vector({-1000, -1000})));
  CHECK(y.value()[0] == doctest::Approx(-1000 + std::log(2.0)).epsilon(1e-15));
  Var z = LogSumExp(tape.Leaf(Tensor::Vector({1000, 1000})));
  CHECK(z.value()[0] == doctest::Approx(1000 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("error paths") {
  Tape tape;
  CHECK_THROWS_AS(Log(tape.Leaf(Tensor::Vector({1.0, 0.0}))), NumericalError);
  CHECK_THROWS_AS(Reshape(tape.Leaf(Tensor({2, 3})), {4}), ShapeError);
  CHECK_THROWS_AS(tape.Backward(tape.Leaf(Tensor({2}))), ShapeError);
  CHECK_THROWS_AS(Add(tape.Leaf(Tensor({2})), tape.Leaf(Tensor({3}))), ShapeError);
  // Overflow to inf is an error rather than a propagated value.
  CHECK_THROWS_AS(Exp(tape.Leaf(Tensor::Vector({1000.0}))), NumericalError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Relu(tape.Leaf(Tensor::Vector({nan}))), NumericalError);
}

TEST_CASE("backward is linear and visits shared nodes once") {
  std::mt19937_64 rng(11);
  const Tensor xv = RandomMatrix(3, 4, rng);
  const Tensor wv = RandomMatrix(4, 2, rng);
  auto grad_of = [&](int which) {
    Tape tape;
    Var x = tape.Leaf(xv);
    Var w = tape.Leaf(wv);
    Var h = Tanh(MatMul(x, w));
    Var f = Sum(Mul(h, h));
    Var g = LogSumExp(h);
    Var root = which == 0 ? f : which == 1 ? g : Add(f, g);
    tape.Backward(root);
    return tape.Grad(x);
  };
  const Tensor gf = grad_of(0), gg = grad_of(1), gsum = grad_of(2);
  for (std::size_t i = 0; i < gsum.size(); ++i) {
    CHECK(gsum[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-14));
  }
  CHECK(grad_of(2) == gsum);  // rerun is bit-identical
}

TEST_CASE("unreached and constant nodes get zero gradient") {
  Tape tape;
  Var a = tape.Leaf(Tensor::Vector({1, 2}));
  Var unused = tape.Leaf(Tensor::Vector({3}));
  Var c = tape.Constant(Tensor::Vector({4, 5}));
  tape.Backward(Sum(Mul(a, c)));
  CHECK(tape.Grad(a) == Tensor::Vector({4, 5}));
  CHECK(tape.Grad(unused) == Tensor::Vector({0}));
  CHECK_FALSE(tape.RequiresGrad(c));
}

TEST_CASE("finite-difference suite covers every op") {
  const auto cases = gradcheck::CasesForScope("ops");
  const auto report = gradcheck::Run(cases);
  for (const auto& r : report.results) {
    INFO(r.name << " max rel error " << r.max_rel_error);
    CHECK(r.seeds == 20);
    CHECK(r.max_rel_error < 1e-6);
  }
  CHECK(report.passed());
}

TEST_CASE("finite-difference checker catches a broken backward") {
  const auto r = gradcheck::Check(gradcheck::FaultyCase());
  CHECK_FALSE(r.passed);
  CHECK(r.max_rel_error > 1e-2);
}

TEST_CASE("relative error floor") {
  const std::vector<double> zero = {0.0, 0.0};
  const std::vector<double> tiny = {1e-12, 0.0};
  CHECK(gradcheck::RelativeError(zero, tiny) < 1e-7);
  const std::vector<double> a = {1.0, 2.0};
  const std::vector<double> b = {1.0, 2.2};
  CHECK(gradcheck::RelativeError(a, b) == doctest::Approx(0.2 / std::sqrt(1 + 2.2 * 2.2)));
}

}  // namespace
}  // namespace kws::ad
