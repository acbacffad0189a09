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

#include "gentse/encoder.h"

#include <algorithm>
#include <sstream>

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {

void EncoderConfig::validate() const {
  require(n_mels >= 1 && d_model >= 1 && n_layers >= 0 && n_heads >= 1, ErrorCode::kConfig,
          "encoder dimensions must be positive");
  require(d_model % n_heads == 0, ErrorCode::kConfig, "encoder d_model must be divisible by n_heads");
  require(lora_rank >= 0 && lora_rank <= d_model, ErrorCode::kConfig, "lora_rank must be in [0, d_model]");
  require(max_frames >= 2 && max_enroll_frames >= 1, ErrorCode::kConfig, "positional capacity too small");
  require(d_speaker >= 1, ErrorCode::kConfig, "d_speaker must be positive");
  for (const auto& t : lora_targets) {
    require(t == "query" || t == "key" || t == "value" || t == "output", ErrorCode::kConfig,
            "unknown LoRA target '" + t + "'");
  }
}

EncoderBlockImpl::EncoderBlockImpl(const EncoderConfig& cfg, const AttentionLoRA& lora) {
  ln_attn = register_module("ln_attn", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.d_model})));
  attn = register_module("attn", MultiHeadAttention(cfg.d_model, cfg.n_heads, lora));
  ln_mlp = register_module("ln_mlp", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.d_model})));
  mlp = register_module("mlp", Mlp(cfg.d_model, cfg.d_model * cfg.mlp_ratio));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x) {
  auto h = ln_attn(x);
  auto y = x + attn(h, h);
  return y + mlp(ln_mlp(y));
}

TargetEncoderImpl::TargetEncoderImpl(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto has = [&](const char* t) {
    return std::find(cfg_.lora_targets.begin(), cfg_.lora_targets.end(), t) != cfg_.lora_targets.end();
  };
  AttentionLoRA lora;
  lora.query = has("query") ? cfg_.lora_rank : 0;
  lora.key = has("key") ? cfg_.lora_rank : 0;
  lora.value = has("value") ? cfg_.lora_rank : 0;
  lora.output = has("output") ? cfg_.lora_rank : 0;
  lora.scaling = cfg_.lora_scaling;

  conv1 = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(cfg_.n_mels, cfg_.d_model, 3).padding(1)));
  conv2 = register_module(
      "conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(cfg_.d_model, cfg_.d_model, 3).stride(2).padding(1)));
  pos = register_buffer("pos", sinusoids(cfg_.max_frames, cfg_.n_mels));
  // Warm start near the base table so prompts begin close to the pre-trained regime.
  auto init = sinusoids(cfg_.max_enroll_frames, cfg_.n_mels) +
              0.01 * torch::randn({cfg_.max_enroll_frames, cfg_.n_mels});
  enroll_pos = register_parameter("enroll_pos", init);
  speaker_proj = register_module("speaker_proj", torch::nn::Linear(cfg_.d_speaker, cfg_.d_model));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg_.n_layers; ++i) blocks->push_back(EncoderBlock(cfg_, lora));
  ln_post = register_module("ln_post", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.d_model})));
}

torch::Tensor TargetEncoderImpl::frontend(const torch::Tensor& x) {
  auto h = torch::gelu(conv1(x.unsqueeze(0)));
  h = torch::gelu(conv2(h));
  return h.squeeze(0).t();
}

torch::Tensor TargetEncoderImpl::run_blocks(torch::Tensor x) {
  for (auto& m : *blocks) x = m->as<EncoderBlockImpl>()->forward(x);
  return ln_post(x);
}

TargetSpeechTokens TargetEncoderImpl::encode_base(const torch::Tensor& mel) {
  require(mel.dim() == 2 && mel.size(0) == cfg_.n_mels, ErrorCode::kInvalidInput,
          "encoder input must be [n_mels, T]");
  const auto t = mel.size(1);
  require(t >= 2, ErrorCode::kInvalidInput, "encoder needs at least 2 frames");
  require(t <= cfg_.max_frames, ErrorCode::kCapacity,
          std::to_string(t) + " frames exceed positional capacity " + std::to_string(cfg_.max_frames));
  auto x = mel + pos.narrow(0, 0, t).t().to(mel.dtype());
  auto h = run_blocks(frontend(x));
  const auto keep = t / 2;
  return {h.narrow(0, h.size(0) - keep, keep)};
}

std::int64_t TargetEncoderImpl::prompted_length(std::int64_t frames, std::int64_t enroll_frames,
                                                PromptSwitches s) const {
  const auto total = frames + (s.enrollment ? enroll_frames : 0);
  return (s.speaker ? 1 : 0) + (total + 1) / 2;
}

TargetSpeechTokens TargetEncoderImpl::encode_target(const torch::Tensor& mixture, const torch::Tensor& enrollment,
                                                    const torch::Tensor& speaker, PromptSwitches switches) {
  require(mixture.dim() == 2 && mixture.size(0) == cfg_.n_mels, ErrorCode::kInvalidInput,
          "mixture features must be [n_mels, T]");
  const auto t = mixture.size(1);
  require(t >= 2, ErrorCode::kInvalidInput, "encoder needs at least 2 mixture frames");
  require(t <= cfg_.max_frames, ErrorCode::kCapacity,
          std::to_string(t) + " frames exceed positional capacity " + std::to_string(cfg_.max_frames));

  auto x = mixture + pos.narrow(0, 0, t).t().to(mixture.dtype());
  if (switches.enrollment) {
    require(enrollment.defined() && enrollment.dim() == 2, ErrorCode::kInvalidInput,
            "enrollment prompt enabled but no enrollment features given");
    require(enrollment.size(0) == cfg_.n_mels, ErrorCode::kInvalidInput,
            "enrollment has " + std::to_string(enrollment.size(0)) + " mel bands, mixture has " +
                std::to_string(cfg_.n_mels));
    const auto te = enrollment.size(1);
    require(te >= 1 && te <= cfg_.max_enroll_frames, ErrorCode::kCapacity,
            std::to_string(te) + " enrollment frames exceed capacity " + std::to_string(cfg_.max_enroll_frames));
    auto e = enrollment + enroll_pos.narrow(0, 0, te).t().to(enrollment.dtype());
    x = torch::cat({e, x}, 1);
  }
  auto h = frontend(x);
  if (switches.speaker) {
    require(speaker.defined() && speaker.dim() == 1 && speaker.size(0) == cfg_.d_speaker,
            ErrorCode::kInvalidInput, "speaker embedding must be a vector of length d_speaker");
    h = torch::cat({speaker_proj(speaker).unsqueeze(0), h}, 0);
  }
  h = run_blocks(h);
  const auto keep = t / 2;
  return {h.narrow(0, h.size(0) - keep, keep)};
}

std::vector<LoRALinear> TargetEncoderImpl::adapted_layers() {
  std::vector<LoRALinear> out;
  for (auto& m : *blocks) {
    auto attn = m->as<EncoderBlockImpl>()->attn;
    for (auto& l : {attn->query, attn->key, attn->value, attn->out}) {
      if (l->rank() > 0) out.push_back(l);
    }
  }
  return out;
}

std::int64_t TargetEncoderImpl::lora_parameter_count() {
  std::int64_t n = 0;
  for (auto& l : adapted_layers()) n += l->lora_A.numel() + l->lora_B.numel();
  return n;
}

void TargetEncoderImpl::merge_lora() {
  require(!merged_, ErrorCode::kState, "encoder adapters already merged");
  for (auto& l : adapted_layers()) l->merge();
  merged_ = true;
}

bool TargetEncoderImpl::is_lora_name(const std::string& name) {
  return name.find("lora_A") != std::string::npos || name.find("lora_B") != std::string::npos;
}

bool TargetEncoderImpl::is_prompt_name(const std::string& name) {
  return name.rfind("enroll_pos", 0) == 0 || name.rfind("speaker_proj.", 0) == 0;
}

NamedTensors TargetEncoderImpl::base_parameters() {
  NamedTensors out;
  for (auto& p : named_parameters()) {
    if (!is_lora_name(p.key()) && !is_prompt_name(p.key())) out.emplace_back(p.key(), p.value());
  }
  return out;
}

NamedTensors TargetEncoderImpl::lora_parameters() {
  NamedTensors out;
  for (auto& p : named_parameters()) {
    if (is_lora_name(p.key())) out.emplace_back(p.key(), p.value());
  }
  return out;
}

void assign_from_archive(const NamedTensors& params, const std::map<std::string, torch::Tensor>& archive,
                         const std::string& prefix) {
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& [name, p] : params) {
    const auto key = prefix + name;
    expected.insert(key);
    auto it = archive.find(key);
    if (it == archive.end()) {
      problems.push_back("missing " + key);
    } else if (it->second.sizes() != p.sizes()) {
      std::ostringstream os;
      os << "shape of " << key << ": archive " << it->second.sizes() << ", model " << p.sizes();
      problems.push_back(os.str());
    }
  }
  for (const auto& [key, t] : archive) {
    if (key.rfind(prefix, 0) == 0 && !expected.count(key)) problems.push_back("unexpected " + key);
  }
  if (!problems.empty()) {
    std::string report = std::to_string(problems.size()) + " weight mismatch(es):";
    for (const auto& p : problems) report += "\n  " + p;
    fail(ErrorCode::kMismatch, report);
  }
  torch::NoGradGuard guard;
  for (const auto& [name, p] : params) p.copy_(archive.at(prefix + name).to(p.dtype()));
}

}  // namespace gentse
