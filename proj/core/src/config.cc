// Copyright 2026 The gentse Authors
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

#include "gentse/config.h"

#include <cstdlib>
#include <fstream>
#include <set>
#include <type_traits>

#include "gentse/archive.h"
#include "gentse/error.h"

namespace gentse {
namespace {

using nlohmann::json;

template <class T>
struct EnumNames;
template <>
struct EnumNames<OdeSolver> {
  static constexpr std::pair<OdeSolver, const char*> kAll[] = {{OdeSolver::kEuler, "euler"},
                                                               {OdeSolver::kMidpoint, "midpoint"}};
};
template <>
struct EnumNames<UpsampleMode> {
  static constexpr std::pair<UpsampleMode, const char*> kAll[] = {{UpsampleMode::kRepeat, "repeat"},
                                                                  {UpsampleMode::kLinear, "linear"}};
};
template <>
struct EnumNames<LogBase> {
  static constexpr std::pair<LogBase, const char*> kAll[] = {{LogBase::kNatural, "natural"}, {LogBase::kTen, "ten"}};
};
template <>
struct EnumNames<CeReduction> {
  static constexpr std::pair<CeReduction, const char*> kAll[] = {{CeReduction::kMean, "mean"},
                                                                 {CeReduction::kSum, "sum"}};
};

class Out;
class In;

template <class B> void visit(B& b, FeatureConfig& c) {
  b("sample_rate", c.sample_rate)("n_fft", c.n_fft)("win_length", c.win_length)("hop_length", c.hop_length)(
      "n_mels", c.n_mels)("f_min", c.f_min)("f_max", c.f_max)("log_floor", c.log_floor)("log_base", c.log_base);
}
template <class B> void visit(B& b, FeatureNorm& c) { b("offset", c.offset)("scale", c.scale); }
template <class B> void visit(B& b, EncoderConfig& c) {
  b("n_mels", c.n_mels)("d_model", c.d_model)("n_layers", c.n_layers)("n_heads", c.n_heads)("mlp_ratio", c.mlp_ratio)(
      "max_frames", c.max_frames)("max_enroll_frames", c.max_enroll_frames)("d_speaker", c.d_speaker)(
      "lora_rank", c.lora_rank)("lora_scaling", c.lora_scaling)("lora_targets", c.lora_targets)("full_finetune",
                                                                                                 c.full_finetune);
}
template <class B> void visit(B& b, FlowConfig& c) {
  b("width", c.width)("n_blocks", c.n_blocks)("time_dim", c.time_dim)("kernel_size", c.kernel_size)("sigma", c.sigma)(
      "n_mc", c.n_mc)("n_steps", c.n_steps)("solver", c.solver)("upsample", c.upsample);
}
template <class B> void visit(B& b, DecoderConfig& c) {
  b("vocab_size", c.vocab_size)("d_model", c.d_model)("n_layers", c.n_layers)("n_heads", c.n_heads)(
      "mlp_ratio", c.mlp_ratio)("max_text_positions", c.max_text_positions);
}
template <class B> void visit(B& b, VocoderConfig& c) { b("n_iter", c.n_iter)("mel_inverse_iter", c.mel_inverse_iter); }
template <class B> void visit(B& b, ModelConfig& c) {
  b("features", c.features)("norm", c.norm)("encoder", c.encoder)("flow", c.flow)("decoder", c.decoder)(
      "vocoder", c.vocoder)("alphabet", c.alphabet)("embed_active_range", c.embed_active_range)("init_seed",
                                                                                               c.init_seed);
}
template <class B> void visit(B& b, SamplerConfig& c) {
  b("snr_min_db", c.snr_min_db)("snr_max_db", c.snr_max_db)("enroll_seconds", c.enroll_seconds)(
      "random_enroll_crop", c.random_enroll_crop);
}
template <class B> void visit(B& b, Ablations& c) {
  b("no_spk_emb", c.no_spk_emb)("no_enroll", c.no_enroll)("no_joint", c.no_joint);
}
template <class B> void visit(B& b, TrainConfig& c) {
  b("global_batch", c.global_batch)("micro_batch", c.micro_batch)("epochs", c.epochs)("lr", c.lr)(
      "lr_decay_factor", c.lr_decay_factor)("lr_decay_epoch", c.lr_decay_epoch)("seed", c.seed)("ablations",
                                                                                                c.ablations)(
      "train_decoder", c.train_decoder)("ce_weight", c.ce_weight)("ce_reduction", c.ce_reduction)("beta1", c.beta1)(
      "beta2", c.beta2)("weight_decay", c.weight_decay)("eps", c.eps)("clip_norm", c.clip_norm)(
      "max_consecutive_skips", c.max_consecutive_skips)("sampler", c.sampler);
}
template <class B> void visit(B& b, PretrainConfig& c) {
  b("epochs", c.epochs)("batch", c.batch)("lr", c.lr)("clip_norm", c.clip_norm)("seed", c.seed);
}
template <class B> void visit(B& b, EvalConfig& c) {
  b("flow_steps", c.flow_steps)("solver", c.solver)("seed", c.seed)("max_decode_len", c.max_decode_len)(
      "dnsmos_command", c.dnsmos_command)("sbs_command", c.sbs_command)("embedder_command", c.embedder_command)(
      "embedder_dim", c.embedder_dim)("n_mixtures", c.n_mixtures);
}
template <class B> void visit(B& b, PathsConfig& c) {
  b("train_manifest", c.train_manifest)("eval_manifest", c.eval_manifest)("pairings", c.pairings)(
      "pretrain_manifest", c.pretrain_manifest)("base_weights", c.base_weights)("speaker_projection",
      c.speaker_projection)("output_root", c.output_root);
}
template <class B> void visit(B& b, RunConfig& c) {
  b("model", c.model)("train", c.train)("pretrain", c.pretrain)("eval", c.eval)("paths", c.paths);
}

template <class T>
concept Visitable = requires(Out& o, T& t) { visit(o, t); };

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorCode::kConfig, where + ": " + what);
}

template <class T>
void read(const json& v, T& out, const std::string& where);

class In {
 public:
  In(const json& j, std::string where) : j_(j), where_(std::move(where)) {}
  template <class T>
  In& operator()(const char* key, T& value) {
    known_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) read(*it, value, where_.empty() ? key : where_ + "." + key);
    return *this;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) {
        fail(ErrorCode::kConfig, "unknown key '" + (where_.empty() ? it.key() : where_ + "." + it.key()) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> known_;
};

template <class T>
json write(const T& v);

class Out {
 public:
  template <class T>
  Out& operator()(const char* key, const T& value) {
    j_[key] = write(value);
    return *this;
  }
  json take() { return std::move(j_); }

 private:
  json j_ = json::object();
};

template <class T>
void read(const json& v, T& out, const std::string& where) {
  if constexpr (Visitable<T>) {
    if (!v.is_object()) bad(where, "expected an object");
    In in(v, where);
    visit(in, out);
    in.finish();
  } else if constexpr (std::is_enum_v<T>) {
    if (!v.is_string()) bad(where, "expected a string");
    const auto s = v.get<std::string>();
    for (const auto& [value, name] : EnumNames<T>::kAll) {
      if (s == name) {
        out = value;
        return;
      }
    }
    bad(where, "unknown value '" + s + "'");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad(where, "expected a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad(where, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) {
        out = v.get<T>();
      } else if (v.get<std::int64_t>() < 0) {
        bad(where, "expected a non-negative integer");
      } else {
        out = static_cast<T>(v.get<std::int64_t>());
      }
    } else {
      out = v.get<T>();
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad(where, "expected a number");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) bad(where, "expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    if (!v.is_array()) bad(where, "expected an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) bad(where, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  } else {
    static_assert(sizeof(T) == 0, "no JSON reader for this type");
  }
}

template <class T>
json write(const T& v) {
  if constexpr (Visitable<T>) {
    Out o;
    visit(o, const_cast<T&>(v));
    return o.take();
  } else if constexpr (std::is_enum_v<T>) {
    for (const auto& [value, name] : EnumNames<T>::kAll) {
      if (value == v) return name;
    }
    return nullptr;
  } else {
    return json(v);
  }
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  require(eval.flow_steps >= 1, ErrorCode::kConfig, "eval.flow_steps must be >= 1");
  require(eval.embedder_command.empty() || eval.embedder_dim >= 1, ErrorCode::kConfig,
          "eval.embedder_dim is required with eval.embedder_command");
  require(pretrain.epochs >= 0 && pretrain.batch >= 1 && pretrain.lr > 0.0, ErrorCode::kConfig,
          "pretrain epochs/batch/lr out of range");
}

json to_json(const ModelConfig& c) { return write(c); }
json to_json(const TrainConfig& c) { return write(c); }
json to_json(const RunConfig& c) { return write(c); }

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  read(j, c, "");
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  read(j, c, "");
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  read(j, c, "");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, "config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_environment(RunConfig& c) {
  if (const char* s = std::getenv("GENTSE_SEED"); s && *s) {
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    require(end && *end == '\0', ErrorCode::kConfig, std::string("GENTSE_SEED is not an integer: ") + s);
    c.train.seed = c.pretrain.seed = c.eval.seed = v;
  }
  if (const char* s = std::getenv("GENTSE_OUTPUT_ROOT"); s && *s) c.paths.output_root = s;
}

std::string canonical_json(const json& j) { return j.dump(); }

std::string fingerprint(const RunConfig& c) { return hex64(fnv1a64(canonical_json(to_json(c)))); }
std::string fingerprint(const ModelConfig& c) { return hex64(fnv1a64(canonical_json(to_json(c)))); }

}  // namespace gentse
