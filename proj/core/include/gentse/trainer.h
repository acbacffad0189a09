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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <torch/optim/adamw.h>

#include "gentse/mixing.h"
#include "gentse/model.h"

namespace gentse {

struct Ablations {
  bool no_spk_emb = false;
  bool no_enroll = false;
  bool no_joint = false;

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct TrainConfig {
  int global_batch = 16;
  int micro_batch = 1;  // examples per backward pass; global_batch % micro_batch == 0
  int epochs = 10;
  double lr = 1e-4;
  double lr_decay_factor = 0.1;
  int lr_decay_epoch = 5;
  std::uint64_t seed = 0;
  Ablations ablations;
  bool train_decoder = true;
  double ce_weight = 1.0;
  CeReduction ce_reduction = CeReduction::kMean;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-2;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  int max_consecutive_skips = 3;
  SamplerConfig sampler;

  void validate() const;
  PromptSwitches switches() const { return {!ablations.no_spk_emb, !ablations.no_enroll}; }
  TrainablePolicy policy() const { return {switches(), train_decoder}; }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// lr0 before decay_epoch, lr0 * factor from then on.
double lr_schedule(const TrainConfig& cfg, int epoch);

struct LossReport {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double cfm = 0.0;
  double ce = 0.0;
  double total = 0.0;
  int examples = 0;
  bool skipped = false;
};

struct RunningLosses {
  double cfm = 0.0;
  double ce = 0.0;
  double total = 0.0;
  std::int64_t steps = 0;

  void add(const LossReport& r);
  double mean_cfm() const { return steps ? cfm / steps : 0.0; }
  double mean_ce() const { return steps ? ce / steps : 0.0; }
  double mean_total() const { return steps ? total / steps : 0.0; }
  friend bool operator==(const RunningLosses&, const RunningLosses&) = default;
};

struct EpochReport {
  int epoch = 0;
  double cfm = 0.0;
  double ce = 0.0;
  double total = 0.0;
  std::int64_t steps = 0;
  std::int64_t skipped = 0;
  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

struct TrainState {
  std::int64_t step = 0;
  int epoch = 0;
  std::size_t cursor = 0;  // position in the current epoch's target order
  RunningLosses running;   // current epoch
  std::int64_t epoch_skipped = 0;
  int consecutive_skips = 0;
  std::int64_t total_skipped = 0;
  std::vector<EpochReport> history;
};

inline constexpr int kCheckpointVersion = 1;

// One optimizer over the trainable set; per-example forward passes with
// gradient accumulation over the global batch.
class JointTrainer {
 public:
  // `base_fingerprint` set means the base weights came from an external
  // archive; checkpoints then omit frozen base tensors.
  JointTrainer(TseModel model, const Corpus* corpus, TrainConfig cfg,
               std::optional<std::uint64_t> base_fingerprint = std::nullopt);

  // Deterministic training example: target utterance order[position] of `epoch`.
  MixtureExample example_at(int epoch, std::size_t position) const;
  std::size_t epoch_size() const;

  // Next global batch from the cursor; crosses into the next epoch only
  // via train_epoch().
  LossReport train_step();
  LossReport train_step(const std::vector<MixtureExample>& batch);
  EpochReport train_epoch();
  std::vector<EpochReport> fit();

  // kState when requires_grad flags differ from the policy.
  void audit_trainable();

  // Per-step JSON-Lines log.
  void set_log(const std::filesystem::path& path);
  void on_step(std::function<void(const LossReport&)> cb) { step_cb_ = std::move(cb); }

  // Recorded in checkpoints so the model can be rebuilt without the trainer.
  void set_base_path(std::filesystem::path path) { base_path_ = std::move(path); }

  void save_checkpoint(const std::filesystem::path& dir);
  // The trainer must be constructed with the checkpoint's configs (train.epochs may
  // differ, to extend a finished run).
  // kMissingFile, kVersion, kCorrupt, kMismatch as appropriate.
  void resume(const std::filesystem::path& dir);

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  TseModel& model() { return model_; }

  // When on, the accumulated (pre-clipping) gradients of the last
  // non-skipped step are kept for inspection.
  void keep_gradients(bool on) { keep_grads_ = on; }
  const std::map<std::string, torch::Tensor>& last_gradients() const { return last_grads_; }

 private:
  TseModel model_;
  const Corpus* corpus_;
  TrainConfig cfg_;
  std::optional<std::uint64_t> base_fingerprint_;
  std::filesystem::path base_path_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  TrainState state_;
  std::unique_ptr<std::ofstream> log_;
  std::chrono::steady_clock::time_point started_;
  std::function<void(const LossReport&)> step_cb_;
  bool keep_grads_ = false;
  std::map<std::string, torch::Tensor> last_grads_;
  std::vector<std::string> trainable_order_;
};

struct LoadedCheckpoint {
  TseModel model{nullptr};
  TrainConfig train;
  std::int64_t step = 0;
  std::vector<EpochReport> history;
};

// Rebuilds the trained model stored in a checkpoint. Externally supplied base
// weights are read from `base_dir`, or from the path recorded in the
// checkpoint when empty; kMismatch when their fingerprint differs.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const std::filesystem::path& base_dir = {});

struct HeldOutReport {
  double cfm = 0.0;
  double ce = 0.0;
  double total = 0.0;  // cfm + ce_weight * ce, regardless of ablations
  double wer = 0.0;    // greedy decoding, mean over items
  std::size_t items = 0;
};

// Teacher-forced losses (flow noise seeded per item) and greedy-decode WER.
HeldOutReport evaluate_held_out(TseModelImpl& model, const std::vector<MixtureExample>& items, PromptSwitches switches,
                                std::uint64_t seed, double ce_weight = 1.0, bool decode = true);

struct PretrainConfig {
  int epochs = 1;
  int batch = 16;
  double lr = 1e-3;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const PretrainConfig&, const PretrainConfig&) = default;
};

// Trains the base (encoder outside adapters/prompts, plus decoder) as a
// recogniser on clean single-speaker utterances. Returns epoch-mean CE.
std::vector<double> pretrain_base(TseModelImpl& model, const Corpus& clean, const PretrainConfig& cfg,
                                  const std::function<void(std::int64_t, double)>& on_step = {});

// Mean and standard deviation of log-mel values over a corpus.
FeatureNorm estimate_feature_norm(const Corpus& corpus, const FeatureConfig& features, std::size_t max_items = 256);

}  // namespace gentse
