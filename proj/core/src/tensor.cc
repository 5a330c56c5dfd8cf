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

#include "kws/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kws/errors.h"

namespace kws {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("zero-sized dimension in " + ShapeToString(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (NumElements(shape_) != data_.size()) {
    throw ShapeError("shape " + ShapeToString(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " elements");
  }
}

Tensor Tensor::Matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::Scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                     ShapeToString(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace kws
