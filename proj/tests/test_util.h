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

#ifndef KWS_TESTS_TEST_UTIL_H_
#define KWS_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "kws/model.h"
#include "kws/tensor.h"

namespace kws::testing {

inline Tensor RandomTensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline ModelConfig SmallModelConfig(TrainMode mode, int input_dim = 12) {
  ModelConfig c;
  c.mode = mode;
  c.encoder = {.n_blocks = 2, .d_model = 8, .n_heads = 2, .d_ff = 16, .n_phone_logits = 6,
               .input_dim = input_dim};
  c.xattn = {.n_blocks = 1, .d_query = 8, .query_len = 3, .n_heads = 2, .d_ff = 16,
             .n_phrase_logits = 2};
  c.blstm = {.hidden = 5};
  return c;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("kws_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void WriteFile(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

}  // namespace kws::testing

#endif  // KWS_TESTS_TEST_UTIL_H_
