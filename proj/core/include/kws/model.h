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

// Transformer phonetic encoder and the three phrase heads: the cross
// attention decoder over a trainable query sequence, the split-branch phrase
// CTC layer, and a BLSTM decoder.

#ifndef KWS_MODEL_H_
#define KWS_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kws/autodiff.h"
#include "kws/tensor.h"

namespace kws {

enum class TrainMode { kPhonemeOnly, kConvMtl, kBlstmMtl, kXattnMtl };

std::string_view ToString(TrainMode mode);
TrainMode ParseTrainMode(std::string_view s);

struct EncoderConfig {
  int n_blocks = 6;
  int d_model = 256;
  int n_heads = 4;
  int d_ff = 1024;
  int n_phone_logits = 54;
  int input_dim = 280;

  void Validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// The decoder block mirrors an encoder block plus the cross attention layer.
struct CrossAttnDecoderConfig {
  int n_blocks = 1;  // P
  int d_query = 256;
  int query_len = 4;  // M
  int n_heads = 4;
  int d_ff = 1024;
  int n_phrase_logits = 2;

  void Validate(const EncoderConfig& enc) const;
  friend bool operator==(const CrossAttnDecoderConfig&,
                         const CrossAttnDecoderConfig&) = default;
};

struct BlstmConfig {
  int hidden = 256;
  friend bool operator==(const BlstmConfig&, const BlstmConfig&) = default;
};

struct ModelConfig {
  TrainMode mode = TrainMode::kXattnMtl;
  EncoderConfig encoder;
  CrossAttnDecoderConfig xattn;
  BlstmConfig blstm;

  void Validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Trainable tensors by stable name. Iteration order is the name order.
class ModelParams {
 public:
  const Tensor& Get(std::string_view name) const;
  Tensor& Mutable(std::string_view name);
  bool Contains(std::string_view name) const;
  void Set(std::string name, Tensor value);

  const std::map<std::string, Tensor, std::less<>>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t NumScalars() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::map<std::string, Tensor, std::less<>> tensors_;
};

// Name -> shape table implied by a config.
std::map<std::string, Shape> ParamShapes(const ModelConfig& cfg);

// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) for weights, biases and the query
// sequence; layer-norm gains start at 1 and offsets at 0.
ModelParams InitParams(const ModelConfig& cfg, std::uint64_t seed);

// Lazily binds parameters onto a tape as grad-requiring leaves.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ModelParams& params) : tape_(tape), params_(params) {}

  ad::Var operator()(std::string_view name);
  // Uses an existing node for `name` instead of a fresh leaf.
  void Bind(std::string name, ad::Var var) { bound_[std::move(name)] = var; }
  ad::Tape& tape() { return tape_; }

  // Gradient for every parameter used in the graph, after tape.Backward().
  std::map<std::string, Tensor, std::less<>> Gradients() const;

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  std::map<std::string, ad::Var, std::less<>> bound_;
};

struct EncoderOutput {
  ad::Var hidden;        // T' x d_model
  ad::Var phone_logits;  // T' x n_phone_logits
};

// softmax(q k^T / sqrt(d)) v. When `weights` is non-null it receives the
// attention matrix. `order_free` sums over keys in sorted order, making the
// output bit-identical under a permutation of the key/value rows.
ad::Var Attention(ad::Var q, ad::Var k, ad::Var v, ad::Var* weights = nullptr,
                  bool order_free = false);

// Per-head affine projections (column blocks of <prefix>.wq/.wk/.wv),
// attention per head, concatenation and an output affine map.
ad::Var MultiHeadAttention(BoundParams& p, std::string_view prefix, ad::Var q_in,
                           ad::Var k_in, ad::Var v_in, int n_heads, bool order_free = false);

Tensor SinusoidalPositions(std::size_t frames, std::size_t dim);

EncoderOutput Encode(BoundParams& p, ad::Var features, const EncoderConfig& cfg);

// Returns 2 logits [positive, negative].
ad::Var CrossAttentionHead(BoundParams& p, const EncoderOutput& enc,
                           const CrossAttnDecoderConfig& cfg);

// Returns T' x 3 logits [positive, negative, blank].
ad::Var SplitBranchHead(BoundParams& p, const EncoderOutput& enc);

// One LSTM direction over the rows of `x`; returns T x hidden outputs in
// input time order. Gate layout in the packed weights is [i, f, g, o].
ad::Var RunLstm(BoundParams& p, std::string_view prefix, ad::Var x, bool reverse);

// Returns 2 logits from [forward output at the last frame, backward output at
// the first frame].
ad::Var BlstmHead(BoundParams& p, const EncoderOutput& enc);

// Phrase head output for the configured mode; invalid for phoneme-only.
ad::Var PhraseHead(BoundParams& p, const EncoderOutput& enc, const ModelConfig& cfg);

struct ModelOutputs {
  Tensor phone_logits;   // T' x n_phone_logits
  Tensor phrase_output;  // head output; empty for phoneme-only models
};

// Forward pass without keeping the tape.
ModelOutputs Infer(const ModelParams& params, const ModelConfig& cfg, const Tensor& features);

// Model checkpoint. `extra` carries optimizer moments and other named
// tensors; `counters` carries integer training state.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  ModelParams extra;
  std::map<std::string, std::int64_t> counters;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Validates version, config, and every parameter shape against the config.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

void SaveParams(const std::filesystem::path& path, const ModelConfig& cfg,
                const ModelParams& params);
ModelParams LoadParams(const std::filesystem::path& path, ModelConfig* cfg = nullptr);

}  // namespace kws

#endif  // KWS_MODEL_H_
