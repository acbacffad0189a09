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
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/embedding.h>

#include "gentse/encoder.h"
#include "gentse/nn.h"
#include "gentse/tokenizer.h"

namespace gentse {

struct DecoderConfig {
  int vocab_size = 33;
  int d_model = 256;
  int n_layers = 4;
  int n_heads = 4;
  int mlp_ratio = 4;
  int max_text_positions = 128;

  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

enum class CeReduction { kMean, kSum };

class DecoderBlockImpl : public torch::nn::Module {
 public:
  explicit DecoderBlockImpl(const DecoderConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& memory);

  torch::nn::LayerNorm ln_self{nullptr}, ln_cross{nullptr}, ln_mlp{nullptr};
  MultiHeadAttention self_attn{nullptr}, cross_attn{nullptr};
  Mlp mlp{nullptr};
};
TORCH_MODULE(DecoderBlock);

// Autoregressive transformer over transcript tokens with causal
// self-attention and full cross-attention to the target speech tokens.
// Output logits reuse the token embedding matrix.
class TextDecoderImpl : public torch::nn::Module {
 public:
  explicit TextDecoderImpl(DecoderConfig cfg);

  // [len(prefix), V]; row j parameterises p(next | prefix[0..j], H).
  torch::Tensor decode_logits(const TargetSpeechTokens& tokens, const std::vector<TokenId>& prefix);

  const DecoderConfig& config() const { return cfg_; }

  torch::nn::Embedding token_embedding{nullptr};
  torch::Tensor positional;  // [max_text_positions, d]
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::LayerNorm ln_post{nullptr};

 private:
  DecoderConfig cfg_;
};
TORCH_MODULE(TextDecoder);

// Cross-entropy over the transcript body and EOT. `logits` are the decoder
// outputs for targets.prefix(); condition-token positions are excluded.
// kInvalidInput when a target id is outside the vocabulary or the logit
// rows do not match the prefix length.
torch::Tensor ce_loss(const torch::Tensor& logits, const TranscriptTokens& targets,
                      CeReduction reduction = CeReduction::kMean);

struct GreedyResult {
  TranscriptTokens tokens;
  bool truncated = false;  // stopped at max_len without emitting EOT
};

// Starts from `condition`, appends argmax tokens until EOT or max_len body
// tokens. kCapacity when |condition| + max_len exceeds the position table.
GreedyResult greedy_decode(TextDecoderImpl& decoder, const TargetSpeechTokens& tokens,
                           const std::vector<TokenId>& condition, TokenId eot, int max_len);

}  // namespace gentse
