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

#include "gentse/nn.h"

#include <cmath>

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {

namespace F = torch::nn::functional;

torch::Tensor sinusoids(std::int64_t length, std::int64_t channels, double max_timescale) {
  const std::int64_t half = channels / 2;
  auto table = torch::zeros({length, channels}, torch::kFloat32);
  if (half == 0) return table;
  const double inc = half > 1 ? std::log(max_timescale) / static_cast<double>(half - 1) : 0.0;
  auto inv = torch::exp(-inc * torch::arange(half, torch::kFloat64));
  auto scaled = torch::arange(length, torch::kFloat64).unsqueeze(1) * inv.unsqueeze(0);
  table.narrow(1, 0, half).copy_(torch::sin(scaled));
  table.narrow(1, half, half).copy_(torch::cos(scaled));
  return table;
}

LoRALinearImpl::LoRALinearImpl(std::int64_t in, std::int64_t out, bool with_bias, std::int64_t rank,
                               double scaling)
    : rank_(rank), scaling_(scaling) {
  require(rank >= 0, ErrorCode::kInvalidInput, "LoRA rank must be non-negative");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = register_parameter("weight", torch::empty({out, in}).uniform_(-bound, bound));
  if (with_bias) bias = register_parameter("bias", torch::empty({out}).uniform_(-bound, bound));
  if (rank > 0) {
    lora_A = register_parameter("lora_A", torch::empty({rank, in}).uniform_(-bound, bound));
    lora_B = register_parameter("lora_B", torch::zeros({out, rank}));
  }
}

torch::Tensor LoRALinearImpl::forward(const torch::Tensor& x) {
  auto y = F::linear(x, weight, bias);
  if (rank_ > 0 && !merged_) y = y + scaling_ * F::linear(F::linear(x, lora_A), lora_B);
  return y;
}

void LoRALinearImpl::merge() {
  require(!merged_, ErrorCode::kState, "LoRA adapter already merged");
  if (rank_ > 0) {
    torch::NoGradGuard guard;
    weight.add_(scaling_ * torch::matmul(lora_B, lora_A));
  }
  merged_ = true;
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(std::int64_t d_model, std::int64_t n_heads, AttentionLoRA lora)
    : n_heads_(n_heads) {
  require(n_heads > 0 && d_model % n_heads == 0, ErrorCode::kInvalidInput,
          "d_model must be divisible by n_heads");
  query = register_module("query", LoRALinear(d_model, d_model, true, lora.query, lora.scaling));
  key = register_module("key", LoRALinear(d_model, d_model, false, lora.key, lora.scaling));
  value = register_module("value", LoRALinear(d_model, d_model, true, lora.value, lora.scaling));
  out = register_module("out", LoRALinear(d_model, d_model, true, lora.output, lora.scaling));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& context,
                                              bool causal) {
  const auto lq = x.size(0), lk = context.size(0), d = x.size(1);
  const auto dh = d / n_heads_;
  auto q = query(x).view({lq, n_heads_, dh}).transpose(0, 1);
  auto k = key(context).view({lk, n_heads_, dh}).transpose(0, 1);
  auto v = value(context).view({lk, n_heads_, dh}).transpose(0, 1);
  auto scores = torch::matmul(q, k.transpose(1, 2)) / std::sqrt(static_cast<double>(dh));
  if (causal) {
    auto mask = torch::ones({lq, lk}, torch::kBool).triu(1);
    scores = scores.masked_fill(mask, -std::numeric_limits<double>::infinity());
  }
  auto attn = torch::softmax(scores, -1);
  auto y = torch::matmul(attn, v).transpose(0, 1).reshape({lq, d});
  return out(y);
}

MlpImpl::MlpImpl(std::int64_t d_model, std::int64_t hidden) {
  fc1 = register_module("fc1", torch::nn::Linear(d_model, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, d_model));
}

torch::Tensor MlpImpl::forward(const torch::Tensor& x) { return fc2(torch::gelu(fc1(x))); }

}  // namespace gentse
