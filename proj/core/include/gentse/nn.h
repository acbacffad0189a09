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

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/modules/normalization.h>
#include <torch/types.h>

namespace gentse {

// Whisper-style sinusoidal table [length, channels]: sin half then cos half.
torch::Tensor sinusoids(std::int64_t length, std::int64_t channels, double max_timescale = 10000.0);

// Linear layer with an optional low-rank update:
//   y = x W0^T + b + scaling * (x A^T) B^T,  A: [rank, in], B: [out, rank].
// B starts at zero so the adapted layer initially equals the base layer.
class LoRALinearImpl : public torch::nn::Module {
 public:
  LoRALinearImpl(std::int64_t in, std::int64_t out, bool bias, std::int64_t rank, double scaling);

  torch::Tensor forward(const torch::Tensor& x);

  // Folds scaling * B A into W0. A second call throws kState.
  void merge();
  bool merged() const { return merged_; }
  std::int64_t rank() const { return rank_; }
  double scaling() const { return scaling_; }

  torch::Tensor weight;
  torch::Tensor bias;
  torch::Tensor lora_A;
  torch::Tensor lora_B;

 private:
  std::int64_t rank_;
  double scaling_;
  bool merged_ = false;
};
TORCH_MODULE(LoRALinear);

struct AttentionLoRA {
  std::int64_t query = 0;
  std::int64_t key = 0;
  std::int64_t value = 0;
  std::int64_t output = 0;
  double scaling = 1.0;
};

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(std::int64_t d_model, std::int64_t n_heads, AttentionLoRA lora = {});

  // x: [Lq, d], context: [Lk, d]. Causal masking requires Lq == Lk.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context, bool causal = false);

  LoRALinear query{nullptr}, key{nullptr}, value{nullptr}, out{nullptr};

 private:
  std::int64_t n_heads_;
};
TORCH_MODULE(MultiHeadAttention);

class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(std::int64_t d_model, std::int64_t hidden);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(Mlp);

}  // namespace gentse
