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

#include "gentse/decoder.h"

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {

void DecoderConfig::validate() const {
  require(vocab_size >= 5, ErrorCode::kConfig, "vocab_size must be >= 5 (4 condition ids + EOT)");
  require(d_model >= 1 && n_layers >= 0 && n_heads >= 1 && d_model % n_heads == 0, ErrorCode::kConfig,
          "decoder d_model must be positive and divisible by n_heads");
  require(max_text_positions >= 5, ErrorCode::kConfig, "max_text_positions must be >= 5");
}

DecoderBlockImpl::DecoderBlockImpl(const DecoderConfig& cfg) {
  const auto ln = [&] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.d_model})); };
  ln_self = register_module("ln_self", ln());
  self_attn = register_module("self_attn", MultiHeadAttention(cfg.d_model, cfg.n_heads));
  ln_cross = register_module("ln_cross", ln());
  cross_attn = register_module("cross_attn", MultiHeadAttention(cfg.d_model, cfg.n_heads));
  ln_mlp = register_module("ln_mlp", ln());
  mlp = register_module("mlp", Mlp(cfg.d_model, cfg.d_model * cfg.mlp_ratio));
}

torch::Tensor DecoderBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& memory) {
  auto h = ln_self(x);
  auto y = x + self_attn(h, h, /*causal=*/true);
  y = y + cross_attn(ln_cross(y), memory);
  return y + mlp(ln_mlp(y));
}

TextDecoderImpl::TextDecoderImpl(DecoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  token_embedding = register_module("token_embedding", torch::nn::Embedding(cfg_.vocab_size, cfg_.d_model));
  {
    torch::NoGradGuard guard;
    token_embedding->weight.normal_(0.0, 0.02);
  }
  positional = register_parameter("positional", 0.01 * torch::randn({cfg_.max_text_positions, cfg_.d_model}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg_.n_layers; ++i) blocks->push_back(DecoderBlock(cfg_));
  ln_post = register_module("ln_post", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.d_model})));
}

torch::Tensor TextDecoderImpl::decode_logits(const TargetSpeechTokens& tokens, const std::vector<TokenId>& prefix) {
  const auto len = static_cast<std::int64_t>(prefix.size());
  require(len >= 1, ErrorCode::kInvalidInput, "decoder prefix is empty");
  require(len <= cfg_.max_text_positions, ErrorCode::kCapacity,
          "prefix of " + std::to_string(len) + " tokens exceeds " + std::to_string(cfg_.max_text_positions));
  require(tokens.values.dim() == 2 && tokens.values.size(1) == cfg_.d_model, ErrorCode::kInvalidInput,
          "speech tokens must be [L, d_model]");
  for (auto id : prefix) {
    require(id >= 0 && id < cfg_.vocab_size, ErrorCode::kInvalidInput, "token id out of vocabulary");
  }
  auto ids = torch::tensor(prefix, torch::kInt64);
  auto x = token_embedding(ids) + positional.narrow(0, 0, len);
  for (auto& m : *blocks) x = m->as<DecoderBlockImpl>()->forward(x, tokens.values);
  x = ln_post(x);
  return torch::matmul(x, token_embedding->weight.t());
}

torch::Tensor ce_loss(const torch::Tensor& logits, const TranscriptTokens& targets, CeReduction reduction) {
  const auto n_cond = static_cast<std::int64_t>(targets.condition.size());
  require(n_cond >= 1, ErrorCode::kInvalidInput, "condition sequence is empty");
  const auto expect_rows = n_cond + static_cast<std::int64_t>(targets.body.size());
  require(logits.dim() == 2 && logits.size(0) == expect_rows, ErrorCode::kInvalidInput,
          "logits must have one row per prefix token");
  const auto vocab = logits.size(1);
  auto ys = targets.targets();
  for (auto id : ys) {
    require(id >= 0 && id < vocab, ErrorCode::kInvalidInput,
            "target id " + std::to_string(id) + " >= vocabulary size " + std::to_string(vocab));
  }
  // Row n_cond - 1 (last condition token) predicts y_1; the last row predicts EOT.
  auto rows = logits.narrow(0, n_cond - 1, static_cast<std::int64_t>(ys.size()));
  auto logp = torch::log_softmax(rows, -1);
  auto idx = torch::tensor(ys, torch::kInt64).unsqueeze(1);
  auto nll = -logp.gather(1, idx).squeeze(1);
  return reduction == CeReduction::kSum ? nll.sum() : nll.mean();
}

GreedyResult greedy_decode(TextDecoderImpl& decoder, const TargetSpeechTokens& tokens,
                           const std::vector<TokenId>& condition, TokenId eot, int max_len) {
  require(max_len >= 0, ErrorCode::kInvalidInput, "max_len must be non-negative");
  require(static_cast<int>(condition.size()) + max_len <= decoder.config().max_text_positions,
          ErrorCode::kCapacity, "max_len exceeds the decoder position table");
  torch::NoGradGuard guard;
  GreedyResult r;
  r.tokens.condition = condition;
  r.tokens.eot = eot;
  for (int step = 0;; ++step) {
    if (step == max_len) {
      r.truncated = true;
      break;
    }
    auto logits = decoder.decode_logits(tokens, r.tokens.prefix());
    auto next = logits[logits.size(0) - 1].argmax().item<std::int64_t>();
    if (next == eot) break;
    r.tokens.body.push_back(next);
  }
  return r;
}

}  // namespace gentse
