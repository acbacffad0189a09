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

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>

#include "gentse/archive.h"
#include "gentse/nn.h"

namespace gentse {

struct EncoderConfig {
  int n_mels = 80;
  int d_model = 256;
  int n_layers = 4;
  int n_heads = 4;
  int mlp_ratio = 4;
  int max_frames = 3000;         // capacity of Pos, in input frames
  int max_enroll_frames = 1000;  // capacity of Pos'
  int d_speaker = 160;           // d_e
  int lora_rank = 16;
  double lora_scaling = 1.0;
  std::vector<std::string> lora_targets{"query", "key", "value", "output"};
  // Every encoder weight trainable (the "full" point of a rank sweep).
  bool full_finetune = false;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct SpeakerEmbedding {
  torch::Tensor vector;  // [d_e]
};

// Mixture-aligned hidden sequence, time-major [L, d_m] with L = floor(T/2).
struct TargetSpeechTokens {
  torch::Tensor values;
  std::int64_t length() const { return values.size(0); }
};

struct PromptSwitches {
  bool speaker = true;
  bool enrollment = true;

  friend bool operator==(const PromptSwitches&, const PromptSwitches&) = default;
};

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(const EncoderConfig& cfg, const AttentionLoRA& lora);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::LayerNorm ln_attn{nullptr}, ln_mlp{nullptr};
  MultiHeadAttention attn{nullptr};
  Mlp mlp{nullptr};
};
TORCH_MODULE(EncoderBlock);

// Whisper-style encoder: additive positional table on the mel input, two
// 1-D convolutions (second with stride 2), pre-norm transformer blocks,
// final LayerNorm. Attention projections carry LoRA adapters. Prompting
// adds a learnable enrollment table Pos' and a projected speaker token.
class TargetEncoderImpl : public torch::nn::Module {
 public:
  explicit TargetEncoderImpl(EncoderConfig cfg);

  // X: [d_f, T] (normalised features), T >= 2.
  TargetSpeechTokens encode_base(const torch::Tensor& mel);

  // mixture: [d_f, T]; enrollment: [d_f, T'] (unused when the switch is
  // off); speaker: [d_e] (unused when the switch is off).
  TargetSpeechTokens encode_target(const torch::Tensor& mixture, const torch::Tensor& enrollment,
                                   const torch::Tensor& speaker, PromptSwitches switches);

  // Length of the internal (prompted) sequence before slicing.
  std::int64_t prompted_length(std::int64_t frames, std::int64_t enroll_frames, PromptSwitches s) const;

  // Folds every adapter into its base weight; kState if already merged.
  void merge_lora();
  bool lora_merged() const { return merged_; }

  std::vector<LoRALinear> adapted_layers();
  std::int64_t lora_parameter_count();

  const EncoderConfig& config() const { return cfg_; }

  static bool is_lora_name(const std::string& name);
  static bool is_prompt_name(const std::string& name);  // Pos' or speaker projection
  // Parameters belonging to the pre-trained base (not LoRA, not prompts).
  NamedTensors base_parameters();
  NamedTensors lora_parameters();

  torch::nn::Conv1d conv1{nullptr}, conv2{nullptr};
  torch::Tensor pos;         // buffer [max_frames, d_f]
  torch::Tensor enroll_pos;  // parameter [max_enroll_frames, d_f]
  torch::nn::Linear speaker_proj{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::LayerNorm ln_post{nullptr};

 private:
  torch::Tensor frontend(const torch::Tensor& x);  // [d_f, T] -> [ceil(T/2), d_m]
  torch::Tensor run_blocks(torch::Tensor x);

  EncoderConfig cfg_;
  bool merged_ = false;
};
TORCH_MODULE(TargetEncoder);

// Copies `names` from an archive into `params`; collects every missing
// name, unexpected name (under `prefix`) and shape difference into one
// kMismatch report.
void assign_from_archive(const NamedTensors& params, const std::map<std::string, torch::Tensor>& archive,
                         const std::string& prefix);

}  // namespace gentse
