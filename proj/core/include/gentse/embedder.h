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

#include <memory>
#include <string>

#include <torch/types.h>

#include "gentse/audio.h"
#include "gentse/features.h"
#include "gentse/mixing.h"
#include "gentse/plugin.h"

namespace gentse {

// Waveform -> fixed-length speaker vector.
class SpeakerEmbedder {
 public:
  virtual ~SpeakerEmbedder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  // float32 [dim()]. kInvalidInput on an empty waveform.
  virtual torch::Tensor embed(const Waveform& w) = 0;
};

// Per-band mean and standard deviation of the log-mel spectrum over active
// frames (frame energy within `active_range` nats of the loudest frame).
// Each half is centred across bands, which removes overall level.
// dim = 2 * n_mels.
class StatsEmbedder final : public SpeakerEmbedder {
 public:
  explicit StatsEmbedder(FeatureConfig features, double active_range = 4.6);

  std::string name() const override { return "mel-stats"; }
  int dim() const override { return 2 * features_.n_mels; }
  torch::Tensor embed(const Waveform& w) override;
  torch::Tensor embed_mel(const torch::Tensor& log_mel) const;  // [n_mels, T]

 private:
  FeatureConfig features_;
  double active_range_;
};

// Linear map applied to StatsEmbedder vectors: y = (x - mean) * matrix.
struct SpeakerProjection {
  torch::Tensor mean;    // float64 [d_in]
  torch::Tensor matrix;  // float64 [d_in, d_out]
};

// Linear discriminant analysis over speaker-labelled statistics vectors
// `stats` [N, d_in]: within-speaker scatter (plus `ridge` times its mean
// eigenvalue) is whitened and the `out_dim` directions of largest
// between-speaker spread are kept. kInvalidInput when out_dim is not below
// the number of distinct labels or a row count mismatches.
SpeakerProjection fit_speaker_projection(const torch::Tensor& stats, const std::vector<int>& labels, int out_dim,
                                         double ridge = 1e-3);
// Fits on up to `max_per_speaker` utterances of every corpus speaker.
SpeakerProjection fit_speaker_projection(const Corpus& corpus, const FeatureConfig& features, int out_dim,
                                         int max_per_speaker = 100);
void save_projection(const std::filesystem::path& dir, const SpeakerProjection& p);
SpeakerProjection load_projection(const std::filesystem::path& dir);

// StatsEmbedder followed by a fitted SpeakerProjection.
class ProjectedStatsEmbedder final : public SpeakerEmbedder {
 public:
  ProjectedStatsEmbedder(FeatureConfig features, SpeakerProjection projection, double active_range = 4.6);

  std::string name() const override { return "mel-stats-lda"; }
  int dim() const override { return static_cast<int>(projection_.matrix.size(1)); }
  torch::Tensor embed(const Waveform& w) override;

 private:
  StatsEmbedder stats_;
  SpeakerProjection projection_;
};

// Embedder served by an external process. Request {"wav_path": ...},
// reply {"embedding": [...]} with exactly `dim` finite numbers.
class PluginEmbedder final : public SpeakerEmbedder {
 public:
  PluginEmbedder(std::vector<std::string> command, int dim);

  std::string name() const override { return "plugin:" + process_.argv().front(); }
  int dim() const override { return dim_; }
  torch::Tensor embed(const Waveform& w) override;

 private:
  PluginProcess process_;
  int dim_;
};

}  // namespace gentse
