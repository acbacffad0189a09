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

#include "gentse/flow.h"

#include <cmath>

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {
namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.sizes() == b.sizes(), ErrorCode::kInvalidInput, "x0 and x1 shapes differ");
}

// Channel LayerNorm over [1, W, T].
torch::Tensor channel_norm(torch::nn::LayerNorm& ln, const torch::Tensor& h) {
  return ln(h.transpose(1, 2)).transpose(1, 2);
}

torch::Tensor time_embedding(const torch::Tensor& t, int dim) {
  const int half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, t.options()) / std::max(half - 1, 1));
  auto arg = 1000.0 * t.reshape({1}) * freqs;
  return torch::cat({torch::sin(arg), torch::cos(arg)});
}

}  // namespace

void FlowConfig::validate() const {
  require(width >= 1 && n_blocks >= 0 && time_dim >= 2 && kernel_size % 2 == 1, ErrorCode::kConfig,
          "flow width/blocks/time_dim must be positive and kernel_size odd");
  require(sigma >= 0.0 && sigma < 1.0, ErrorCode::kConfig, "flow sigma must be in [0, 1)");
  require(n_mc >= 1 && n_steps >= 1, ErrorCode::kConfig, "n_mc and n_steps must be >= 1");
}

torch::Tensor ot_path(const torch::Tensor& x0, const torch::Tensor& x1, double t, double sigma) {
  check_same_shape(x0, x1);
  require(t >= 0.0 && t <= 1.0, ErrorCode::kInvalidInput, "t must be in [0, 1]");
  return (1.0 - (1.0 - sigma) * t) * x0 + t * x1;
}

torch::Tensor ot_target_field(const torch::Tensor& x0, const torch::Tensor& x1, double sigma) {
  check_same_shape(x0, x1);
  return x1 - (1.0 - sigma) * x0;
}

torch::Tensor cfm_loss(const VectorField& field, const torch::Tensor& x1, const FlowConditioning& cond,
                       at::Generator& gen, double sigma, int n_mc) {
  require(n_mc >= 1, ErrorCode::kInvalidInput, "n_mc must be >= 1");
  auto opts = x1.options();
  torch::Tensor total;
  for (int i = 0; i < n_mc; ++i) {
    auto t = torch::rand({}, gen, opts);
    auto x0 = torch::randn(x1.sizes(), gen, opts);
    auto xt = (1.0 - (1.0 - sigma) * t) * x0 + t * x1;
    auto u = x1 - (1.0 - sigma) * x0;
    auto v = field(xt, t, cond);
    require(v.sizes() == x1.sizes(), ErrorCode::kInvalidInput, "vector field changed the sample shape");
    if (!torch::isfinite(v).all().item<bool>()) {
      fail(ErrorCode::kNumeric, "vector field produced non-finite values");
    }
    auto term = (u - v).square().mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(n_mc);
}

torch::Tensor sample_flow(const VectorField& field, const FlowConditioning& cond, at::IntArrayRef shape,
                          int n_steps, at::Generator& gen, OdeSolver solver,
                          const std::optional<torch::Tensor>& x0) {
  require(n_steps >= 1, ErrorCode::kInvalidInput, "n_steps must be >= 1");
  torch::Tensor x;
  if (x0) {
    x = x0->clone();
  } else {
    auto opts = cond.tokens.defined() ? torch::TensorOptions().dtype(cond.tokens.dtype())
                                      : torch::TensorOptions().dtype(torch::kFloat32);
    x = torch::randn(shape, gen, opts);
  }
  const double dt = 1.0 / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    auto t = torch::full({}, k * dt, x.options());
    auto v = field(x, t, cond);
    if (solver == OdeSolver::kMidpoint) {
      auto mid = x + (0.5 * dt) * v;
      v = field(mid, torch::full({}, (k + 0.5) * dt, x.options()), cond);
    }
    x = x + dt * v;
    if (!torch::isfinite(x).all().item<bool>()) {
      fail(ErrorCode::kNumeric, "ODE state became non-finite at step " + std::to_string(k));
    }
  }
  return x;
}

torch::Tensor upsample_tokens(const torch::Tensor& tokens, std::int64_t target_len, UpsampleMode mode) {
  require(tokens.dim() == 2 && tokens.size(0) >= 1, ErrorCode::kInvalidInput, "tokens must be [L, d], L >= 1");
  const auto len = tokens.size(0);
  require(target_len >= len, ErrorCode::kInvalidInput,
          "target length " + std::to_string(target_len) + " < token count " + std::to_string(len));
  if (target_len == len) return tokens;
  if (mode == UpsampleMode::kRepeat) {
    auto idx = torch::div(torch::arange(target_len, torch::kInt64) * len, target_len, "floor");
    return tokens.index_select(0, idx);
  }
  if (len == 1) return tokens.expand({target_len, tokens.size(1)}).contiguous();
  auto pos = torch::arange(target_len, torch::kFloat64) * (static_cast<double>(len - 1) / (target_len - 1));
  auto lo = pos.floor().to(torch::kInt64).clamp_max(len - 1);
  auto hi = (lo + 1).clamp_max(len - 1);
  auto frac = (pos - lo.to(torch::kFloat64)).to(tokens.dtype()).unsqueeze(1);
  auto a = tokens.index_select(0, lo);
  auto b = tokens.index_select(0, hi);
  auto out = a + frac * (b - a);
  // Pin the endpoints exactly.
  out.select(0, 0).copy_(tokens.select(0, 0));
  out.select(0, target_len - 1).copy_(tokens.select(0, len - 1));
  return out;
}

FlowBlockImpl::FlowBlockImpl(int width, int kernel, int dilation) {
  const int pad = dilation * (kernel - 1) / 2;
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  conv1 = register_module(
      "conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(width, width, kernel).padding(pad).dilation(dilation)));
  film = register_module("film", torch::nn::Linear(width, width));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  conv2 = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(width, width, 1)));
}

torch::Tensor FlowBlockImpl::forward(const torch::Tensor& h, const torch::Tensor& cond) {
  auto y = conv1(torch::silu(channel_norm(norm1, h)));
  y = y + film(cond).view({1, -1, 1});
  y = conv2(torch::silu(channel_norm(norm2, y)));
  return h + y;
}

VectorFieldNetImpl::VectorFieldNetImpl(int n_mels, int d_tokens, int d_speaker, FlowConfig cfg)
    : cfg_(cfg), d_speaker_(d_speaker) {
  cfg_.validate();
  const int w = cfg_.width;
  in_proj = register_module(
      "in_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(n_mels, w, cfg_.kernel_size).padding(cfg_.kernel_size / 2)));
  token_proj = register_module("token_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(d_tokens, w, 1)));
  time_fc1 = register_module("time_fc1", torch::nn::Linear(cfg_.time_dim, w));
  time_fc2 = register_module("time_fc2", torch::nn::Linear(w, w));
  speaker_proj = register_module("speaker_proj", torch::nn::Linear(d_speaker, w));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg_.n_blocks; ++i) blocks->push_back(FlowBlock(w, cfg_.kernel_size, 1 << (i % 4)));
  out_norm = register_module("out_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
  out_proj = register_module("out_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(w, n_mels, 1)));
}

torch::Tensor VectorFieldNetImpl::forward(const torch::Tensor& x, const torch::Tensor& t,
                                          const FlowConditioning& cond) {
  require(cond.tokens.defined() && cond.tokens.size(0) == x.size(1), ErrorCode::kInvalidInput,
          "conditioning length must equal the mel frame count");
  auto h = in_proj(x.unsqueeze(0)) + token_proj(cond.tokens.t().unsqueeze(0));
  auto g = time_fc2(torch::silu(time_fc1(time_embedding(t.to(x.dtype()), cfg_.time_dim))));
  if (cond.speaker.defined()) g = g + speaker_proj(cond.speaker);
  for (auto& m : *blocks) h = m->as<FlowBlockImpl>()->forward(h, g);
  return out_proj(torch::silu(channel_norm(out_norm, h))).squeeze(0);
}

VectorField VectorFieldNetImpl::as_field() {
  return [this](const torch::Tensor& x, const torch::Tensor& t, const FlowConditioning& c) {
    return forward(x, t, c);
  };
}

}  // namespace gentse
