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

#include "gentse/model.h"

#include <torch/torch.h>

#include "gentse/error.h"
#include "gentse/rng.h"

namespace gentse {
namespace {

// Seeds the default generator for deterministic construction and restores
// it afterwards.
class ScopedSeed {
 public:
  explicit ScopedSeed(std::uint64_t seed) {
    at::Generator gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    saved_ = gen.get_state();
    gen.set_current_seed(seed);
  }
  ~ScopedSeed() {
    at::Generator gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(saved_);
  }

 private:
  at::Tensor saved_;
};

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

}  // namespace

void ModelConfig::validate() const {
  features.validate();
  encoder.validate();
  flow.validate();
  decoder.validate();
  require(norm.scale > 0.0, ErrorCode::kConfig, "norm.scale must be positive");
  require(encoder.n_mels == features.n_mels, ErrorCode::kConfig,
          "encoder.n_mels (" + std::to_string(encoder.n_mels) + ") != features.n_mels (" +
              std::to_string(features.n_mels) + ")");
  require(decoder.d_model == encoder.d_model, ErrorCode::kConfig, "decoder.d_model must equal encoder.d_model");
  const auto vocab = CharTokenizer(alphabet).vocab_size();
  require(decoder.vocab_size == vocab, ErrorCode::kConfig,
          "decoder.vocab_size " + std::to_string(decoder.vocab_size) + " != tokenizer vocabulary " +
              std::to_string(vocab));
  require(embed_active_range > 0.0, ErrorCode::kConfig, "embed_active_range must be positive");
}

TseModelImpl::TseModelImpl(ModelConfig cfg) : cfg_(std::move(cfg)), tokenizer_(cfg_.alphabet) {
  cfg_.validate();
  ScopedSeed seed(cfg_.init_seed);
  encoder = register_module("encoder", TargetEncoder(cfg_.encoder));
  flow = register_module("flow",
                         VectorFieldNet(cfg_.features.n_mels, cfg_.encoder.d_model, cfg_.encoder.d_speaker, cfg_.flow));
  decoder = register_module("decoder", TextDecoder(cfg_.decoder));
  auto stats = std::make_unique<StatsEmbedder>(cfg_.features, cfg_.embed_active_range);
  stats_embedder_ = stats.get();
  set_embedder(std::move(stats));
}

void TseModelImpl::set_embedder(std::unique_ptr<SpeakerEmbedder> embedder) {
  require(embedder != nullptr, ErrorCode::kConfig, "embedder is null");
  require(embedder->dim() == cfg_.encoder.d_speaker, ErrorCode::kConfig,
          "embedder dim " + std::to_string(embedder->dim()) + " != encoder.d_speaker " +
              std::to_string(cfg_.encoder.d_speaker));
  if (embedder.get() != stats_embedder_) stats_embedder_ = dynamic_cast<StatsEmbedder*>(embedder.get());
  embedder_ = std::move(embedder);
}

torch::Tensor TseModelImpl::normalize(const torch::Tensor& log_mel) const {
  return (log_mel - cfg_.norm.offset) / cfg_.norm.scale;
}

torch::Tensor TseModelImpl::denormalize(const torch::Tensor& x) const {
  return x * cfg_.norm.scale + cfg_.norm.offset;
}

torch::Tensor TseModelImpl::features(const Waveform& w) const {
  return normalize(compute_log_mel(w, cfg_.features).values);
}

PreparedExample TseModelImpl::prepare(const MixtureExample& ex) {
  PreparedExample p;
  p.mixture = features(ex.mixture);
  p.target = features(ex.target);
  auto enroll_raw = compute_log_mel(ex.enrollment, cfg_.features).values;
  p.enrollment = normalize(enroll_raw);
  p.speaker = stats_embedder_ ? stats_embedder_->embed_mel(enroll_raw) : embedder_->embed(ex.enrollment);
  p.transcript = tokenizer_.tokens_for(ex.transcript);
  return p;
}

TargetSpeechTokens TseModelImpl::encode(const PreparedExample& ex, PromptSwitches switches) {
  return encoder->encode_target(ex.mixture, ex.enrollment, ex.speaker, switches);
}

FlowConditioning TseModelImpl::conditioning(const TargetSpeechTokens& tokens, std::int64_t frames,
                                            const torch::Tensor& speaker) const {
  return {upsample_tokens(tokens.values, frames, cfg_.flow.upsample), speaker};
}

ExampleLosses TseModelImpl::losses(const PreparedExample& ex, PromptSwitches switches, at::Generator& gen,
                                   CeReduction reduction) {
  auto h = encode(ex, switches);
  auto cond = conditioning(h, ex.target.size(1), ex.speaker);
  ExampleLosses out;
  out.cfm = cfm_loss(flow->as_field(), ex.target, cond, gen, cfg_.flow.sigma, cfg_.flow.n_mc);
  out.ce = ce_loss(decoder->decode_logits(h, ex.transcript.prefix()), ex.transcript, reduction);
  return out;
}

Extraction TseModelImpl::extract(const Waveform& mixture, const Waveform& enrollment, PromptSwitches switches,
                                 int n_steps, std::uint64_t seed, const Vocoder& vocoder) {
  torch::NoGradGuard guard;
  MixtureExample ex;
  ex.mixture = mixture;
  ex.target = mixture;
  ex.enrollment = enrollment;
  auto p = prepare(ex);
  Extraction out;
  out.tokens = encode(p, switches);
  auto cond = conditioning(out.tokens, p.mixture.size(1), p.speaker);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  auto x = sample_flow(flow->as_field(), cond, p.mixture.sizes(), n_steps, gen, cfg_.flow.solver);
  out.mel = {denormalize(x).contiguous(), cfg_.features.hop_length, cfg_.features.win_length};
  out.waveform = vocoder.vocode(out.mel);
  out.waveform.samples.resize(mixture.size(), 0.0f);
  return out;
}

GreedyResult TseModelImpl::transcribe(const TargetSpeechTokens& tokens, int max_len) {
  const auto cond = tokenizer_.condition_ids();
  const std::vector<TokenId> c(cond.begin(), cond.end());
  if (max_len <= 0) max_len = cfg_.decoder.max_text_positions - static_cast<int>(c.size());
  return greedy_decode(*decoder, tokens, c, tokenizer_.eot_id(), max_len);
}

std::string TseModelImpl::text_of(const GreedyResult& r) const { return tokenizer_.decode(r.tokens.body); }

std::set<std::string> TseModelImpl::expected_trainable(const TrainablePolicy& policy) {
  std::set<std::string> out;
  for (const auto& p : named_parameters()) {
    const auto& n = p.key();
    bool on = false;
    if (starts_with(n, "flow.")) {
      on = true;
    } else if (starts_with(n, "decoder.")) {
      on = policy.train_decoder;
    } else if (starts_with(n, "encoder.")) {
      const auto local = n.substr(8);
      if (cfg_.encoder.full_finetune || TargetEncoderImpl::is_lora_name(local)) {
        on = true;
      } else if (starts_with(local, "enroll_pos")) {
        on = policy.prompts.enrollment;
      } else if (starts_with(local, "speaker_proj.")) {
        on = policy.prompts.speaker;
      }
    }
    if (on) out.insert(n);
  }
  return out;
}

std::set<std::string> TseModelImpl::configure_trainable(const TrainablePolicy& policy) {
  auto names = expected_trainable(policy);
  for (auto& p : named_parameters()) p.value().set_requires_grad(names.count(p.key()) > 0);
  return names;
}

std::set<std::string> TseModelImpl::trainable_names() {
  std::set<std::string> out;
  for (const auto& p : named_parameters()) {
    if (p.value().requires_grad()) out.insert(p.key());
  }
  return out;
}

std::vector<torch::Tensor> TseModelImpl::trainable_parameters() {
  std::vector<torch::Tensor> out;
  for (const auto& p : named_parameters()) {
    if (p.value().requires_grad()) out.push_back(p.value());
  }
  return out;
}

NamedTensors TseModelImpl::base_parameters() {
  NamedTensors out;
  for (auto& [n, t] : encoder->base_parameters()) out.emplace_back("encoder." + n, t);
  for (const auto& p : decoder->named_parameters()) out.emplace_back("decoder." + p.key(), p.value());
  return out;
}

NamedTensors TseModelImpl::all_parameters() {
  NamedTensors out;
  for (const auto& p : named_parameters()) out.emplace_back(p.key(), p.value());
  return out;
}

void TseModelImpl::save_base(const std::filesystem::path& dir) {
  NamedTensors detached;
  for (auto& [n, t] : base_parameters()) detached.emplace_back(n, t.detach());
  save_archive(dir, detached);
}

std::uint64_t TseModelImpl::load_base(const std::filesystem::path& dir) {
  auto archive = load_archive(dir);
  NamedTensors file_view;
  for (auto& [n, t] : archive) file_view.emplace_back(n, t);
  auto params = base_parameters();
  std::map<std::string, torch::Tensor> wanted;
  for (auto& [n, t] : archive) wanted.emplace(n, t);
  assign_from_archive(params, wanted, "");
  return tensors_fingerprint(file_view);
}

}  // namespace gentse
