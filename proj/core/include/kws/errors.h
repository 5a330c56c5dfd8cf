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

#ifndef KWS_ERRORS_H_
#define KWS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace kws {

// Shape or dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced by an op, log of a non-positive value, NaN gradient, or an
// infeasible CTC target. Training bugs surface here instead of propagating.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, truncated or version-mismatched file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures (open, write, missing file).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or unknown key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace kws

#endif  // KWS_ERRORS_H_
