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

#include <functional>
#include <optional>

#include <ATen/core/Generator.h>
#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/modules/normalization.h>

namespace gentse {

enum class OdeSolver { kEuler, kMidpoint };
enum class UpsampleMode { kRepeat, kLinear };

struct FlowConfig {
  int width = 128;
  int n_blocks = 4;
  int time_dim = 64;
  int kernel_size = 3;
  double sigma = 1e-4;
  int n_mc = 1;
  int n_steps = 10;
  OdeSolver solver = OdeSolver::kEuler;
  UpsampleMode upsample = UpsampleMode::kRepeat;

  void validate() const;
  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

// mu: target tokens stretched to the mel frame rate plus the speaker vector.
struct FlowConditioning {
  torch::Tensor tokens;   // [T, d_m]
  torch::Tensor speaker;  // [d_e], may be undefined
};

// v(x_t, t | mu). x_t has the mel shape [d_f, T]; t is a 0-dim tensor.
using VectorField =
    std::function<torch::Tensor(const torch::Tensor& x, const torch::Tensor& t, const FlowConditioning& cond)>;

// (1 - (1 - sigma) t) x0 + t x1
torch::Tensor ot_path(const torch::Tensor& x0, const torch::Tensor& x1, double t, double sigma);
// x1 - (1 - sigma) x0, constant in t.
torch::Tensor ot_target_field(const torch::Tensor& x0, const torch::Tensor& x1, double sigma);

// Monte-Carlo estimate of E_{t~U[0,1], x0~N(0,I)} ||u - v(x_t, t)||^2,
// averaged per element and over n_mc draws. Differentiable through `field`.
// Draw order per sample: t, then x0. kNumeric on non-finite field output.
torch::Tensor cfm_loss(const VectorField& field, const torch::Tensor& x1, const FlowConditioning& cond,
                       at::Generator& gen, double sigma, int n_mc);

// Integrates dx/dt = v(x, t) from t=0 to 1 with n_steps fixed steps,
// starting from x0 when given, else a N(0, I) draw of `shape`.
// kNumeric names the step at which the state became non-finite.
torch::Tensor sample_flow(const VectorField& field, const FlowConditioning& cond, at::IntArrayRef shape,
                          int n_steps, at::Generator& gen, OdeSolver solver = OdeSolver::kEuler,
                          const std::optional<torch::Tensor>& x0 = std::nullopt);

// [L, d] -> [target_len, d]. kRepeat maps frame i to token floor(i L / target_len);
// kLinear interpolates with both endpoints pinned.
torch::Tensor upsample_tokens(const torch::Tensor& tokens, std::int64_t target_len, UpsampleMode mode);

class FlowBlockImpl : public torch::nn::Module {
 public:
  FlowBlockImpl(int width, int kernel, int dilation);
  torch::Tensor forward(const torch::Tensor& h, const torch::Tensor& cond);  // h [1, W, T], cond [W]

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv1d conv1{nullptr}, conv2{nullptr};
  torch::nn::Linear film{nullptr};
};
TORCH_MODULE(FlowBlock);

// Residual dilated 1-D conv stack conditioned on time (sinusoidal
// embedding + MLP), speaker vector and frame-rate token features.
class VectorFieldNetImpl : public torch::nn::Module {
 public:
  VectorFieldNetImpl(int n_mels, int d_tokens, int d_speaker, FlowConfig cfg);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& t, const FlowConditioning& cond);
  VectorField as_field();

  const FlowConfig& config() const { return cfg_; }

  torch::nn::Conv1d in_proj{nullptr}, token_proj{nullptr}, out_proj{nullptr};
  torch::nn::Linear time_fc1{nullptr}, time_fc2{nullptr}, speaker_proj{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::LayerNorm out_norm{nullptr};

 private:
  FlowConfig cfg_;
  int d_speaker_;
};
TORCH_MODULE(VectorFieldNet);

}  // namespace gentse
