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

#include "kws/model.h"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "kws/binary_io.h"
#include "kws/errors.h"

namespace kws {
namespace {

using ad::Var;

std::string Key(std::string_view prefix, std::string_view leaf) {
  std::string s(prefix);
  s += '.';
  s += leaf;
  return s;
}

void AddAttentionShapes(std::map<std::string, Shape>& shapes, const std::string& prefix,
                        std::size_t d) {
  for (const char* m : {"q", "k", "v", "o"}) {
    shapes[prefix + ".w" + m] = {d, d};
    shapes[prefix + ".b" + m] = {d};
  }
}

void AddNormShapes(std::map<std::string, Shape>& shapes, const std::string& prefix,
                   std::size_t d) {
  shapes[prefix + ".g"] = {d};
  shapes[prefix + ".b"] = {d};
}

void AddFeedForwardShapes(std::map<std::string, Shape>& shapes, const std::string& prefix,
                          std::size_t d, std::size_t d_ff) {
  shapes[prefix + ".w1"] = {d, d_ff};
  shapes[prefix + ".b1"] = {d_ff};
  shapes[prefix + ".w2"] = {d_ff, d};
  shapes[prefix + ".b2"] = {d};
}

Var Linear(BoundParams& p, std::string_view prefix, Var x, std::string_view w = "w",
           std::string_view b = "b") {
  return ad::AddBias(ad::MatMul(x, p(Key(prefix, w))), p(Key(prefix, b)));
}

Var Norm(BoundParams& p, std::string_view prefix, Var x) {
  return ad::LayerNorm(x, p(Key(prefix, "g")), p(Key(prefix, "b")));
}

Var FeedForward(BoundParams& p, std::string_view prefix, Var x) {
  Var h = ad::Relu(Linear(p, prefix, x, "w1", "b1"));
  return Linear(p, prefix, h, "w2", "b2");
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::string_view ToString(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPhonemeOnly: return "phoneme_only";
    case TrainMode::kConvMtl: return "conv_mtl";
    case TrainMode::kBlstmMtl: return "blstm_mtl";
    case TrainMode::kXattnMtl: return "xattn_mtl";
  }
  return "unknown";
}

TrainMode ParseTrainMode(std::string_view s) {
  for (TrainMode m : {TrainMode::kPhonemeOnly, TrainMode::kConvMtl, TrainMode::kBlstmMtl,
                      TrainMode::kXattnMtl}) {
    if (ToString(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + std::string(s) +
                    "' (expected phoneme_only, conv_mtl, blstm_mtl or xattn_mtl)");
}

void EncoderConfig::Validate() const {
  Require(n_blocks >= 0 && d_model > 0 && n_heads > 0 && d_ff > 0 && n_phone_logits >= 2 &&
              input_dim > 0,
          "encoder config values must be positive");
  Require(d_model % n_heads == 0, "encoder d_model must be divisible by n_heads");
}

void CrossAttnDecoderConfig::Validate(const EncoderConfig& enc) const {
  Require(n_blocks >= 1 && d_query > 0 && query_len >= 1 && n_heads > 0 && d_ff > 0 &&
              n_phrase_logits == 2,
          "cross attention decoder config values must be positive (2 phrase logits)");
  Require(d_query == enc.d_model, "decoder d_query must equal encoder d_model");
  Require(d_query % n_heads == 0, "decoder d_query must be divisible by n_heads");
}

void ModelConfig::Validate() const {
  encoder.Validate();
  if (mode == TrainMode::kXattnMtl) xattn.Validate(encoder);
  if (mode == TrainMode::kBlstmMtl) Require(blstm.hidden > 0, "blstm hidden must be positive");
}

const Tensor& ModelParams::Get(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ModelParams::Mutable(std::string_view name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter '" + std::string(name) + "'");
  return it->second;
}

bool ModelParams::Contains(std::string_view name) const { return tensors_.contains(name); }

void ModelParams::Set(std::string name, Tensor value) { tensors_[std::move(name)] = std::move(value); }

std::size_t ModelParams::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

std::map<std::string, Shape> ParamShapes(const ModelConfig& cfg) {
  cfg.Validate();
  const EncoderConfig& e = cfg.encoder;
  const auto d = static_cast<std::size_t>(e.d_model);
  std::map<std::string, Shape> shapes;
  shapes["enc.in.w"] = {static_cast<std::size_t>(e.input_dim), d};
  shapes["enc.in.b"] = {d};
  for (int i = 0; i < e.n_blocks; ++i) {
    const std::string b = "enc.b" + std::to_string(i);
    AddAttentionShapes(shapes, b + ".attn", d);
    AddNormShapes(shapes, b + ".ln1", d);
    AddFeedForwardShapes(shapes, b + ".ff", d, static_cast<std::size_t>(e.d_ff));
    AddNormShapes(shapes, b + ".ln2", d);
  }
  shapes["enc.phone.w"] = {d, static_cast<std::size_t>(e.n_phone_logits)};
  shapes["enc.phone.b"] = {static_cast<std::size_t>(e.n_phone_logits)};

  switch (cfg.mode) {
    case TrainMode::kPhonemeOnly:
      break;
    case TrainMode::kConvMtl:
      shapes["split.w"] = {d, 3};
      shapes["split.b"] = {3};
      break;
    case TrainMode::kXattnMtl: {
      const CrossAttnDecoderConfig& x = cfg.xattn;
      const auto dq = static_cast<std::size_t>(x.d_query);
      const auto m = static_cast<std::size_t>(x.query_len);
      shapes["xattn.query"] = {m, dq};
      for (int i = 0; i < x.n_blocks; ++i) {
        const std::string b = "xattn.b" + std::to_string(i);
        AddAttentionShapes(shapes, b + ".self", dq);
        AddNormShapes(shapes, b + ".ln1", dq);
        AddAttentionShapes(shapes, b + ".cross", dq);
        AddNormShapes(shapes, b + ".ln2", dq);
        AddFeedForwardShapes(shapes, b + ".ff", dq, static_cast<std::size_t>(x.d_ff));
        AddNormShapes(shapes, b + ".ln3", dq);
      }
      shapes["xattn.out.w"] = {m * dq, static_cast<std::size_t>(x.n_phrase_logits)};
      shapes["xattn.out.b"] = {static_cast<std::size_t>(x.n_phrase_logits)};
      break;
    }
    case TrainMode::kBlstmMtl: {
      const auto h = static_cast<std::size_t>(cfg.blstm.hidden);
      for (const char* dir : {"blstm.fwd", "blstm.bwd"}) {
        shapes[std::string(dir) + ".wx"] = {d, 4 * h};
        shapes[std::string(dir) + ".wh"] = {h, 4 * h};
        shapes[std::string(dir) + ".b"] = {4 * h};
      }
      shapes["blstm.out.w"] = {2 * h, 2};
      shapes["blstm.out.b"] = {2};
      break;
    }
  }
  return shapes;
}

namespace {

// Weight whose fan-in a bias shares: X.b -> X.w, X.bq -> X.wq, X.b1 -> X.w1;
// LSTM biases pair with the input weights.
std::string WeightForBias(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string stem = name.substr(0, dot + 1);
  const std::string leaf = name.substr(dot + 1);
  if (name.starts_with("blstm.") && leaf == "b" && !name.starts_with("blstm.out")) {
    return stem + "wx";
  }
  return stem + "w" + leaf.substr(1);
}

}  // namespace

ModelParams InitParams(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto shapes = ParamShapes(cfg);
  ModelParams params;
  for (const auto& [name, shape] : shapes) {
    if (name.find(".ln") != std::string::npos) {
      params.Set(name, Tensor(shape, name.ends_with(".g") ? 1.0 : 0.0));
      continue;
    }
    std::size_t fan_in = shape[0];
    if (shape.size() == 1) {
      fan_in = shapes.at(WeightForBias(name))[0];
    } else if (name == "xattn.query") {
      fan_in = shape[1];
    }
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shape);
    for (double& v : t.data()) v = dist(rng);
    params.Set(name, std::move(t));
  }
  return params;
}

Var BoundParams::operator()(std::string_view name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_.Leaf(params_.Get(name), true);
  bound_.emplace(std::string(name), v);
  return v;
}

std::map<std::string, Tensor, std::less<>> BoundParams::Gradients() const {
  std::map<std::string, Tensor, std::less<>> grads;
  for (const auto& [name, v] : bound_) grads.emplace(name, tape_.Grad(v));
  return grads;
}

Var Attention(Var q, Var k, Var v, Var* weights, bool order_free) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention: query " + ShapeToString(q.shape()) + " and key " +
                     ShapeToString(k.shape()) + " widths differ");
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: key " + ShapeToString(k.shape()) + " and value " +
                     ShapeToString(v.shape()) + " row counts differ");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = ad::Scale(ad::MatMulTransposed(q, k), scale);
  Var w = order_free ? ad::SoftmaxRowsOrderFree(scores) : ad::SoftmaxRows(scores);
  if (weights) *weights = w;
  return order_free ? ad::MatMulOrderFree(w, v) : ad::MatMul(w, v);
}

Var MultiHeadAttention(BoundParams& p, std::string_view prefix, Var q_in, Var k_in,
                       Var v_in, int n_heads, bool order_free) {
  Var q = Linear(p, prefix, q_in, "wq", "bq");
  Var k = Linear(p, prefix, k_in, "wk", "bk");
  Var v = Linear(p, prefix, v_in, "wv", "bv");
  const std::size_t d = q.cols();
  if (n_heads <= 0 || d % static_cast<std::size_t>(n_heads) != 0) {
    throw ShapeError("multi_head_attention: width " + std::to_string(d) +
                     " not divisible by " + std::to_string(n_heads) + " heads");
  }
  const std::size_t dh = d / static_cast<std::size_t>(n_heads);
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < static_cast<std::size_t>(n_heads); ++h) {
    if (n_heads == 1) {
      heads.push_back(Attention(q, k, v, nullptr, order_free));
    } else {
      heads.push_back(Attention(ad::SliceCols(q, h * dh, (h + 1) * dh),
                                ad::SliceCols(k, h * dh, (h + 1) * dh),
                                ad::SliceCols(v, h * dh, (h + 1) * dh), nullptr, order_free));
    }
  }
  Var cat = n_heads == 1 ? heads[0] : ad::ConcatCols(heads);
  return Linear(p, prefix, cat, "wo", "bo");
}

Tensor SinusoidalPositions(std::size_t frames, std::size_t dim) {
  Tensor pe({frames, dim});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe.at(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

EncoderOutput Encode(BoundParams& p, Var features, const EncoderConfig& cfg) {
  if (features.value().rank() != 2 ||
      features.cols() != static_cast<std::size_t>(cfg.input_dim)) {
    throw ShapeError("encode: expected T x " + std::to_string(cfg.input_dim) +
                     " features, got " + ShapeToString(features.shape()));
  }
  ad::Tape& tape = p.tape();
  Var h = Linear(p, "enc.in", features);
  h = ad::Add(h, tape.Constant(SinusoidalPositions(features.rows(),
                                                   static_cast<std::size_t>(cfg.d_model))));
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string b = "enc.b" + std::to_string(i);
    h = Norm(p, b + ".ln1", ad::Add(h, MultiHeadAttention(p, b + ".attn", h, h, h, cfg.n_heads)));
    h = Norm(p, b + ".ln2", ad::Add(h, FeedForward(p, b + ".ff", h)));
  }
  return {h, Linear(p, "enc.phone", h)};
}

Var CrossAttentionHead(BoundParams& p, const EncoderOutput& enc,
                       const CrossAttnDecoderConfig& cfg) {
  if (enc.hidden.rows() < 1) throw ShapeError("cross attention head: empty encoder output");
  Var q = p("xattn.query");
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string b = "xattn.b" + std::to_string(i);
    q = Norm(p, b + ".ln1",
             ad::Add(q, MultiHeadAttention(p, b + ".self", q, q, q, cfg.n_heads, true)));
    q = Norm(p, b + ".ln2",
             ad::Add(q, MultiHeadAttention(p, b + ".cross", q, enc.hidden, enc.hidden,
                                           cfg.n_heads)));
    q = Norm(p, b + ".ln3", ad::Add(q, FeedForward(p, b + ".ff", q)));
  }
  // Reductions over the query axis are order-free, so permuting the queries
  // together with the matching blocks of xattn.out.w leaves the logits
  // bit-identical.
  Var flat = ad::Reshape(q, {1, q.value().size()});
  Var logits = ad::AddBias(ad::MatMulOrderFree(flat, p("xattn.out.w")), p("xattn.out.b"));
  return ad::Reshape(logits, {2});
}

Var SplitBranchHead(BoundParams& p, const EncoderOutput& enc) {
  return Linear(p, "split", enc.hidden);
}

Var RunLstm(BoundParams& p, std::string_view prefix, Var x, bool reverse) {
  Var wh = p(Key(prefix, "wh"));
  const std::size_t hidden = wh.rows();
  const std::size_t frames = x.rows();
  Var xw = Linear(p, prefix, x, "wx", "b");
  std::vector<Var> outputs(frames);
  Var h, c;
  for (std::size_t step = 0; step < frames; ++step) {
    const std::size_t t = reverse ? frames - 1 - step : step;
    Var z = ad::SliceRows(xw, t, t + 1);
    if (step > 0) z = ad::Add(z, ad::MatMul(h, wh));
    Var in_gate = ad::Sigmoid(ad::SliceCols(z, 0, hidden));
    Var forget_gate = ad::Sigmoid(ad::SliceCols(z, hidden, 2 * hidden));
    Var cand = ad::Tanh(ad::SliceCols(z, 2 * hidden, 3 * hidden));
    Var out_gate = ad::Sigmoid(ad::SliceCols(z, 3 * hidden, 4 * hidden));
    Var fresh = ad::Mul(in_gate, cand);
    c = step > 0 ? ad::Add(ad::Mul(forget_gate, c), fresh) : fresh;
    h = ad::Mul(out_gate, ad::Tanh(c));
    outputs[t] = h;
  }
  return frames == 1 ? outputs[0] : ad::ConcatRows(outputs);
}

Var BlstmHead(BoundParams& p, const EncoderOutput& enc) {
  const std::size_t frames = enc.hidden.rows();
  if (frames < 1) throw ShapeError("blstm head: empty encoder output");
  Var fwd = RunLstm(p, "blstm.fwd", enc.hidden, false);
  Var bwd = RunLstm(p, "blstm.bwd", enc.hidden, true);
  const Var ends[] = {ad::SliceRows(fwd, frames - 1, frames), ad::SliceRows(bwd, 0, 1)};
  return ad::Reshape(Linear(p, "blstm.out", ad::ConcatCols(ends)), {2});
}

Var PhraseHead(BoundParams& p, const EncoderOutput& enc, const ModelConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::kConvMtl: return SplitBranchHead(p, enc);
    case TrainMode::kBlstmMtl: return BlstmHead(p, enc);
    case TrainMode::kXattnMtl: return CrossAttentionHead(p, enc, cfg.xattn);
    case TrainMode::kPhonemeOnly: break;
  }
  throw ConfigError("phoneme_only models have no phrase head");
}

ModelOutputs Infer(const ModelParams& params, const ModelConfig& cfg, const Tensor& features) {
  ad::Tape tape;
  BoundParams p(tape, params);
  const EncoderOutput enc = Encode(p, tape.Constant(features), cfg.encoder);
  ModelOutputs out;
  out.phone_logits = enc.phone_logits.value();
  if (cfg.mode != TrainMode::kPhonemeOnly) out.phrase_output = PhraseHead(p, enc, cfg).value();
  return out;
}

// Checkpoint layout (little-endian):
//   "KWSCKPT\0" | u32 version | config block | u32 n_counters, (str, i64)* |
//   u32 n_tensors, (str name, u8 section, u32 rank, u64 dims.., u64 offset)* |
//   u64 payload length | f64 payload
namespace {

constexpr std::string_view kCheckpointMagic{"KWSCKPT\0", 8};

void WriteConfig(std::ostream& os, const ModelConfig& c) {
  using io::WriteUInt;
  WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(c.mode));
  for (int v : {c.encoder.n_blocks, c.encoder.d_model, c.encoder.n_heads, c.encoder.d_ff,
                c.encoder.n_phone_logits, c.encoder.input_dim, c.xattn.n_blocks,
                c.xattn.d_query, c.xattn.query_len, c.xattn.n_heads, c.xattn.d_ff,
                c.xattn.n_phrase_logits, c.blstm.hidden}) {
    WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  }
}

ModelConfig ReadConfig(std::istream& is) {
  ModelConfig c;
  const auto mode = io::ReadUInt<std::uint32_t>(is);
  if (mode > static_cast<std::uint32_t>(TrainMode::kXattnMtl)) {
    throw FormatError("checkpoint: unknown mode tag " + std::to_string(mode));
  }
  c.mode = static_cast<TrainMode>(mode);
  for (int* v : {&c.encoder.n_blocks, &c.encoder.d_model, &c.encoder.n_heads,
                 &c.encoder.d_ff, &c.encoder.n_phone_logits, &c.encoder.input_dim,
                 &c.xattn.n_blocks, &c.xattn.d_query, &c.xattn.query_len, &c.xattn.n_heads,
                 &c.xattn.d_ff, &c.xattn.n_phrase_logits, &c.blstm.hidden}) {
    *v = static_cast<int>(io::ReadUInt<std::uint32_t>(is));
  }
  try {
    c.Validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what());
  }
  return c;
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  io::WriteUInt<std::uint32_t>(os, kCheckpointVersion);
  WriteConfig(os, ckpt.config);
  io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.counters.size()));
  for (const auto& [name, value] : ckpt.counters) {
    io::WriteString(os, name);
    io::WriteUInt<std::uint64_t>(os, static_cast<std::uint64_t>(value));
  }
  io::WriteUInt<std::uint32_t>(os,
                               static_cast<std::uint32_t>(ckpt.params.size() + ckpt.extra.size()));
  std::uint64_t offset = 0;
  for (const auto* section : {&ckpt.params, &ckpt.extra}) {
    for (const auto& [name, t] : section->tensors()) {
      io::WriteString(os, name);
      io::WriteUInt<std::uint8_t>(os, section == &ckpt.params ? 0 : 1);
      io::WriteUInt<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
      for (std::size_t dim : t.shape()) io::WriteUInt<std::uint64_t>(os, dim);
      io::WriteUInt<std::uint64_t>(os, offset);
      offset += t.size();
    }
  }
  io::WriteUInt<std::uint64_t>(os, offset);
  for (const auto* section : {&ckpt.params, &ckpt.extra}) {
    for (const auto& [_, t] : section->tensors()) io::WriteF64s(os, t.data());
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  io::ExpectMagic(is, kCheckpointMagic);
  const auto version = io::ReadUInt<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  ckpt.config = ReadConfig(is);
  const auto n_counters = io::ReadUInt<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_counters; ++i) {
    std::string name = io::ReadString(is);
    ckpt.counters[name] = static_cast<std::int64_t>(io::ReadUInt<std::uint64_t>(is));
  }
  struct Entry {
    std::string name;
    std::uint8_t section;
    Shape shape;
    std::uint64_t offset;
  };
  const auto n_tensors = io::ReadUInt<std::uint32_t>(is);
  std::vector<Entry> table;
  std::uint64_t expected_offset = 0;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Entry e;
    e.name = io::ReadString(is);
    e.section = io::ReadUInt<std::uint8_t>(is);
    const auto rank = io::ReadUInt<std::uint32_t>(is);
    if (rank == 0 || rank > 8) throw FormatError("checkpoint: bad rank for '" + e.name + "'");
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(static_cast<std::size_t>(io::ReadUInt<std::uint64_t>(is)));
      if (e.shape.back() == 0) throw FormatError("checkpoint: zero dimension in '" + e.name + "'");
    }
    e.offset = io::ReadUInt<std::uint64_t>(is);
    if (e.offset != expected_offset) throw FormatError("checkpoint: inconsistent offset table");
    expected_offset += NumElements(e.shape);
    table.push_back(std::move(e));
  }
  const auto payload = io::ReadUInt<std::uint64_t>(is);
  if (payload != expected_offset) throw FormatError("checkpoint: payload size mismatch");
  for (Entry& e : table) {
    Tensor t(e.shape);
    io::ReadF64s(is, t.data());
    (e.section == 0 ? ckpt.params : ckpt.extra).Set(std::move(e.name), std::move(t));
  }

  const auto shapes = ParamShapes(ckpt.config);
  if (shapes.size() != ckpt.params.size()) {
    throw FormatError("checkpoint: holds " + std::to_string(ckpt.params.size()) +
                      " parameters, config implies " + std::to_string(shapes.size()));
  }
  for (const auto& [name, shape] : shapes) {
    if (!ckpt.params.Contains(name)) throw FormatError("checkpoint: missing parameter '" + name + "'");
    if (ckpt.params.Get(name).shape() != shape) {
      throw FormatError("checkpoint: parameter '" + name + "' has shape " +
                        ShapeToString(ckpt.params.Get(name).shape()) + ", expected " +
                        ShapeToString(shape));
    }
  }
  return ckpt;
}

void SaveParams(const std::filesystem::path& path, const ModelConfig& cfg,
                const ModelParams& params) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = params;
  SaveCheckpoint(path, ckpt);
}

ModelParams LoadParams(const std::filesystem::path& path, ModelConfig* cfg) {
  Checkpoint ckpt = LoadCheckpoint(path);
  if (cfg) *cfg = ckpt.config;
  return std::move(ckpt.params);
}

}  // namespace kws
