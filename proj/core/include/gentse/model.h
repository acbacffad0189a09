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
#include <memory>
#include <set>
#include <string>

#include <torch/nn/module.h>

#include "gentse/archive.h"
#include "gentse/decoder.h"
#include "gentse/embedder.h"
#include "gentse/encoder.h"
#include "gentse/features.h"
#include "gentse/flow.h"
#include "gentse/mixing.h"
#include "gentse/tokenizer.h"

namespace gentse {

// Affine normalisation of log-mel features: (x - offset) / scale.
struct FeatureNorm {
  double offset = 0.0;
  double scale = 1.0;

  friend bool operator==(const FeatureNorm&, const FeatureNorm&) = default;
};

struct ModelConfig {
  FeatureConfig features;
  FeatureNorm norm;
  EncoderConfig encoder;
  FlowConfig flow;
  DecoderConfig decoder;
  VocoderConfig vocoder;
  std::string alphabet = " abcdefghijklmnopqrstuvwxyz'";
  double embed_active_range = 4.6;
  std::uint64_t init_seed = 0;

  // Cross-module consistency: mel bands, widths, vocabulary, d_e.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Which parameter groups receive gradients.
struct TrainablePolicy {
  PromptSwitches prompts;
  bool train_decoder = true;
};

// Normalised inputs for one mixture example.
struct PreparedExample {
  torch::Tensor mixture;     // [d_f, T]
  torch::Tensor enrollment;  // [d_f, T']
  torch::Tensor target;      // [d_f, T]
  torch::Tensor speaker;     // [d_e]
  TranscriptTokens transcript;
};

struct ExampleLosses {
  torch::Tensor cfm;
  torch::Tensor ce;
};

struct Extraction {
  Waveform waveform;               // trimmed to the mixture length
  LogMelSpectrogram mel;           // de-normalised prediction
  TargetSpeechTokens tokens;
};

class TseModelImpl : public torch::nn::Module {
 public:
  explicit TseModelImpl(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const CharTokenizer& tokenizer() const { return tokenizer_; }
  SpeakerEmbedder& embedder() { return *embedder_; }
  // Replaces the built-in embedder; its dim must equal encoder.d_speaker.
  void set_embedder(std::unique_ptr<SpeakerEmbedder> embedder);

  torch::Tensor normalize(const torch::Tensor& log_mel) const;
  torch::Tensor denormalize(const torch::Tensor& x) const;
  torch::Tensor features(const Waveform& w) const;  // normalised [d_f, T]

  PreparedExample prepare(const MixtureExample& ex);

  TargetSpeechTokens encode(const PreparedExample& ex, PromptSwitches switches);
  FlowConditioning conditioning(const TargetSpeechTokens& tokens, std::int64_t frames,
                                const torch::Tensor& speaker) const;

  // L_OT-CFM on the target mel and teacher-forced L_CE on the transcript.
  ExampleLosses losses(const PreparedExample& ex, PromptSwitches switches, at::Generator& gen,
                       CeReduction reduction = CeReduction::kMean);

  Extraction extract(const Waveform& mixture, const Waveform& enrollment, PromptSwitches switches, int n_steps,
                     std::uint64_t seed, const Vocoder& vocoder);

  GreedyResult transcribe(const TargetSpeechTokens& tokens, int max_len = 0);
  std::string text_of(const GreedyResult& r) const;

  // Sets requires_grad per the policy; returns the trainable names.
  std::set<std::string> configure_trainable(const TrainablePolicy& policy);
  std::set<std::string> expected_trainable(const TrainablePolicy& policy);
  std::set<std::string> trainable_names();
  std::vector<torch::Tensor> trainable_parameters();

  // The pre-trained base: encoder weights outside adapters and prompts,
  // plus the text decoder.
  NamedTensors base_parameters();
  void save_base(const std::filesystem::path& dir);
  // Returns the fingerprint of the loaded archive. kMismatch on any
  // name or shape difference, listing all of them.
  std::uint64_t load_base(const std::filesystem::path& dir);

  NamedTensors all_parameters();

  TargetEncoder encoder{nullptr};
  VectorFieldNet flow{nullptr};
  TextDecoder decoder{nullptr};

 private:
  ModelConfig cfg_;
  CharTokenizer tokenizer_;
  std::unique_ptr<SpeakerEmbedder> embedder_;
  StatsEmbedder* stats_embedder_ = nullptr;
};
TORCH_MODULE(TseModel);

}  // namespace gentse
