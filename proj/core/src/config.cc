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

#include "kws/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "kws/errors.h"

namespace kws {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void Malformed(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "'");
}

template <typename T>
void ParseNumber(std::string_view key, std::string_view value, T* out) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) Malformed(key, value);
  *out = v;
}

void Parse(std::string_view key, std::string_view value, int* out) { ParseNumber(key, value, out); }
void Parse(std::string_view key, std::string_view value, std::uint64_t* out) {
  ParseNumber(key, value, out);
}
void Parse(std::string_view key, std::string_view value, double* out) {
  if (value == "inf") {
    *out = std::numeric_limits<double>::infinity();
    return;
  }
  ParseNumber(key, value, out);
}
void Parse(std::string_view key, std::string_view value, bool* out) {
  if (value == "true" || value == "1") {
    *out = true;
  } else if (value == "false" || value == "0") {
    *out = false;
  } else {
    Malformed(key, value);
  }
}
void Parse(std::string_view key, std::string_view value, std::vector<int>* out) {
  std::vector<int> ids;
  while (!value.empty()) {
    const auto comma = value.find(',');
    int id;
    ParseNumber(key, Trim(value.substr(0, comma)), &id);
    ids.push_back(id);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (ids.empty()) Malformed(key, value);
  *out = std::move(ids);
}

template <typename T>
std::string Format(const T& v) {
  return std::to_string(v);
}
std::string Format(const double& v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string Format(const bool& v) { return v ? "true" : "false"; }
std::string Format(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Ref>
Field MakeField(std::string key, Ref ref) {
  return {key, [ref](const RunConfig& c) { return Format(ref(c)); },
          [ref, key](RunConfig& c, std::string_view v) { Parse(key, v, &ref(c)); }};
}

#define KWS_FIELD(key, member) \
  MakeField(key, [](auto& c) -> auto& { return c.member; })

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f = {
        KWS_FIELD("data.seed", synth.seed),
        KWS_FIELD("data.n_phones", synth.n_phones),
        KWS_FIELD("data.keyword", synth.keyword),
        KWS_FIELD("data.n_asr_utts", synth.n_asr_utts),
        KWS_FIELD("data.n_kws_pos", synth.n_kws_pos),
        KWS_FIELD("data.n_kws_neg", synth.n_kws_neg),
        KWS_FIELD("data.n_eval_pos", synth.n_eval_pos),
        KWS_FIELD("data.n_eval_neg", synth.n_eval_neg),
        KWS_FIELD("data.noise_std", synth.noise_std),
        KWS_FIELD("data.prototype_scale", synth.prototype_scale),
        KWS_FIELD("data.confusable_rate", synth.confusable_rate),
        KWS_FIELD("data.kws_channel_shift", synth.kws_channel_shift),
        KWS_FIELD("data.feature_dim", synth.feature_dim),
        KWS_FIELD("data.min_phone_frames", synth.min_phone_frames),
        KWS_FIELD("data.max_phone_frames", synth.max_phone_frames),
        KWS_FIELD("data.min_asr_phones", synth.min_asr_phones),
        KWS_FIELD("data.max_asr_phones", synth.max_asr_phones),
        KWS_FIELD("data.max_context_phones", synth.max_context_phones),
        KWS_FIELD("data.render_audio", synth.render_audio),
        KWS_FIELD("model.n_blocks", model.encoder.n_blocks),
        KWS_FIELD("model.d_model", model.encoder.d_model),
        KWS_FIELD("model.n_heads", model.encoder.n_heads),
        KWS_FIELD("model.d_ff", model.encoder.d_ff),
        KWS_FIELD("model.n_phone_logits", model.encoder.n_phone_logits),
        KWS_FIELD("model.input_dim", model.encoder.input_dim),
        KWS_FIELD("model.xattn_blocks", model.xattn.n_blocks),
        KWS_FIELD("model.xattn_d_query", model.xattn.d_query),
        KWS_FIELD("model.xattn_query_len", model.xattn.query_len),
        KWS_FIELD("model.xattn_heads", model.xattn.n_heads),
        KWS_FIELD("model.xattn_d_ff", model.xattn.d_ff),
        KWS_FIELD("model.blstm_hidden", model.blstm.hidden),
        KWS_FIELD("train.seed", train.seed),
        KWS_FIELD("train.batch_size", train.batch_size),
        KWS_FIELD("train.kws_fraction", train.kws_fraction),
        KWS_FIELD("train.epochs", train.epochs),
        KWS_FIELD("train.lr_peak", train.lr_peak),
        KWS_FIELD("train.lr_mid", train.lr_mid),
        KWS_FIELD("train.warmup_epochs", train.warmup_epochs),
        KWS_FIELD("train.mid_epoch", train.mid_epoch),
        KWS_FIELD("train.final_decay", train.final_decay),
        KWS_FIELD("train.alpha", train.alpha),
        KWS_FIELD("train.clip_norm", train.clip_norm),
        KWS_FIELD("train.threads", train.threads),
        KWS_FIELD("eval.fa_target", eval.fa_target),
        KWS_FIELD("eval.fa_denominator", eval.fa_denominator),
    };
    // The mode drives both the model graph and the sampler.
    f.insert(f.begin(),
             Field{"mode", [](const RunConfig& c) { return std::string(ToString(c.train.mode)); },
                   [](RunConfig& c, std::string_view v) {
                     c.train.mode = c.model.mode = ParseTrainMode(v);
                   }});
    return f;
  }();
  return fields;
}

#undef KWS_FIELD

const Field& FindField(std::string_view key) {
  for (const Field& f : Fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

RunConfig RunConfig::Desk() {
  RunConfig c;
  c.synth.n_asr_utts = 800;
  c.synth.n_kws_pos = 2000;
  c.synth.n_kws_neg = 2000;
  c.synth.n_eval_pos = 200;
  c.synth.n_eval_neg = 400;
  c.synth.noise_std = 1.0;
  c.synth.kws_channel_shift = 1.0;
  c.model.encoder = {.n_blocks = 2, .d_model = 32, .n_heads = 4, .d_ff = 64,
                     .n_phone_logits = kNumPhoneLogits, .input_dim = 280};
  c.model.xattn = {.n_blocks = 1, .d_query = 32, .query_len = 4, .n_heads = 4, .d_ff = 64,
                   .n_phrase_logits = 2};
  c.model.blstm = {.hidden = 32};
  c.train.kws_fraction = 0.5;
  c.train.epochs = 28;
  c.train.lr_peak = 0.0008;
  c.train.lr_mid = 0.00056;
  return c;
}

void RunConfig::Validate() const {
  synth.Validate();
  model.Validate();
  train.Validate();
  if (model.mode != train.mode) throw ConfigError("model and train modes differ");
  if (model.encoder.input_dim != synth.feature_dim) {
    throw ConfigError("model.input_dim must equal data.feature_dim");
  }
  if (model.encoder.n_phone_logits != synth.n_phones + 1) {
    throw ConfigError("model.n_phone_logits must equal data.n_phones + 1 (blank)");
  }
  if (!(eval.fa_target >= 0.0)) throw ConfigError("eval.fa_target must be >= 0");
  if (!(eval.fa_denominator > 0.0)) throw ConfigError("eval.fa_denominator must be > 0");
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  FindField(key).set(*this, Trim(value));
}

std::string RunConfig::Get(std::string_view key) const { return FindField(key).get(*this); }

const std::vector<std::string>& RunConfig::Keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : Fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::string RunConfig::ToString() const {
  std::string out;
  for (const Field& f : Fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return a.ToString() == b.ToString(); }

RunConfig ParseRunConfig(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    base.Set(Trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig LoadRunConfig(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str(), std::move(base));
}

void ApplyOverride(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override must look like key=value: " + std::string(assignment));
  }
  cfg.Set(Trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

}  // namespace kws
