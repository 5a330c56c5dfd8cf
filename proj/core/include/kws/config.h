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

// Flat key = value run configuration shared by every CLI subcommand.

#ifndef KWS_CONFIG_H_
#define KWS_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kws/data.h"
#include "kws/model.h"
#include "kws/trainer.h"

namespace kws {

struct EvalConfig {
  // Operating point as an absolute FA count when fa_denominator is 1, or a
  // rate when fa_denominator is the negative audio duration.
  double fa_target = 4.0;
  double fa_denominator = 1.0;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct RunConfig {
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  // The committed desk-scale benchmark used by the acceptance suite.
  static RunConfig Desk();

  // Checks every sub-config plus cross-module consistency (mode, dims).
  void Validate() const;

  // Throws ConfigError on an unknown key or malformed value.
  void Set(std::string_view key, std::string_view value);
  std::string Get(std::string_view key) const;
  static const std::vector<std::string>& Keys();

  // One "key = value" line per key, in Keys() order. Round-trips through
  // ParseRunConfig.
  std::string ToString() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

// Applies the assignments in `text` on top of `base`. Blank lines and text
// after '#' are ignored.
RunConfig ParseRunConfig(std::string_view text, RunConfig base = RunConfig::Desk());
RunConfig LoadRunConfig(const std::filesystem::path& path,
                        RunConfig base = RunConfig::Desk());

// Applies a single "key=value" override.
void ApplyOverride(RunConfig& cfg, std::string_view assignment);

}  // namespace kws

#endif  // KWS_CONFIG_H_
