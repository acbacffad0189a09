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

#include "gentse/embedder.h"

#include <unistd.h>

#include <filesystem>
#include <map>

#include <torch/torch.h>

#include "gentse/archive.h"
#include "gentse/error.h"

namespace gentse {

StatsEmbedder::StatsEmbedder(FeatureConfig features, double active_range)
    : features_(features), active_range_(active_range) {
  features_.validate();
  require(active_range_ > 0.0, ErrorCode::kConfig, "active_range must be positive");
}

torch::Tensor StatsEmbedder::embed(const Waveform& w) {
  require(!w.empty(), ErrorCode::kInvalidInput, "cannot embed an empty waveform");
  return embed_mel(compute_log_mel(w, features_).values);
}

torch::Tensor StatsEmbedder::embed_mel(const torch::Tensor& log_mel) const {
  require(log_mel.dim() == 2 && log_mel.size(0) == features_.n_mels && log_mel.size(1) >= 1,
          ErrorCode::kInvalidInput, "embedder input must be [n_mels, T]");
  auto x = log_mel.to(torch::kFloat64);
  auto energy = x.mean(0);
  auto active = energy >= energy.max() - active_range_;
  auto frames = x.index({torch::indexing::Slice(), active});
  auto mean = frames.mean(1);
  auto std = frames.std(1, /*unbiased=*/false);
  mean = mean - mean.mean();
  std = std - std.mean();
  return torch::cat({mean, std}).to(torch::kFloat32);
}

SpeakerProjection fit_speaker_projection(const torch::Tensor& stats, const std::vector<int>& labels, int out_dim,
                                         double ridge) {
  require(stats.dim() == 2 && stats.size(0) == static_cast<std::int64_t>(labels.size()), ErrorCode::kInvalidInput,
          "one label per statistics row required");
  std::map<int, std::vector<std::int64_t>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(static_cast<std::int64_t>(i));
  require(out_dim >= 1 && out_dim < static_cast<int>(rows.size()), ErrorCode::kInvalidInput,
          "projection needs more speakers than output dimensions");
  auto x = stats.to(torch::kFloat64);
  const auto n = static_cast<double>(x.size(0));
  const auto d = x.size(1);
  auto mean = x.mean(0);
  auto sw = torch::zeros({d, d}, torch::kFloat64);
  auto sb = torch::zeros({d, d}, torch::kFloat64);
  for (const auto& [label, idx] : rows) {
    auto xc = x.index_select(0, torch::tensor(idx, torch::kInt64));
    auto mc = xc.mean(0);
    auto dev = xc - mc;
    sw += dev.t().matmul(dev);
    auto dm = (mc - mean).unsqueeze(1);
    sb += static_cast<double>(idx.size()) * dm.matmul(dm.t());
  }
  sw /= n;
  sb /= n;
  sw += ridge * (sw.trace() / static_cast<double>(d)) * torch::eye(d, torch::kFloat64);
  auto [wl, wv] = torch::linalg_eigh(sw);
  auto whiten = wv / wl.sqrt().unsqueeze(0);
  auto [bl, bv] = torch::linalg_eigh(whiten.t().matmul(sb).matmul(whiten));
  // eigh sorts ascending; keep the largest.
  auto top = bv.narrow(1, d - out_dim, out_dim).flip({1});
  return {mean, whiten.matmul(top)};
}

SpeakerProjection fit_speaker_projection(const Corpus& corpus, const FeatureConfig& features, int out_dim,
                                         int max_per_speaker) {
  StatsEmbedder emb(features);
  std::vector<torch::Tensor> stats;
  std::vector<int> labels;
  for (std::size_t s = 0; s < corpus.speakers().size(); ++s) {
    const auto& utts = corpus.utterances_of(corpus.speakers()[s]);
    const auto n = std::min<std::size_t>(utts.size(), static_cast<std::size_t>(max_per_speaker));
    for (std::size_t k = 0; k < n; ++k) {
      stats.push_back(emb.embed(corpus.load(utts[k])));
      labels.push_back(static_cast<int>(s));
    }
  }
  require(!stats.empty(), ErrorCode::kCorpus, "no utterances to fit a speaker projection");
  return fit_speaker_projection(torch::stack(stats), labels, out_dim);
}

void save_projection(const std::filesystem::path& dir, const SpeakerProjection& p) {
  save_archive(dir, {{"mean", p.mean}, {"matrix", p.matrix}});
}

SpeakerProjection load_projection(const std::filesystem::path& dir) {
  auto a = load_archive(dir);
  require(a.count("mean") && a.count("matrix"), ErrorCode::kCorrupt, "projection archive lacks mean/matrix");
  SpeakerProjection p{a.at("mean").to(torch::kFloat64), a.at("matrix").to(torch::kFloat64)};
  require(p.mean.dim() == 1 && p.matrix.dim() == 2 && p.matrix.size(0) == p.mean.size(0), ErrorCode::kCorrupt,
          "projection shapes are inconsistent");
  return p;
}

ProjectedStatsEmbedder::ProjectedStatsEmbedder(FeatureConfig features, SpeakerProjection projection,
                                               double active_range)
    : stats_(features, active_range), projection_(std::move(projection)) {
  require(projection_.matrix.dim() == 2 && projection_.matrix.size(0) == stats_.dim() &&
              projection_.mean.numel() == stats_.dim(),
          ErrorCode::kConfig, "projection input size does not match the statistics dimension");
}

torch::Tensor ProjectedStatsEmbedder::embed(const Waveform& w) {
  auto x = stats_.embed(w).to(torch::kFloat64);
  return (x - projection_.mean).matmul(projection_.matrix).to(torch::kFloat32);
}

PluginEmbedder::PluginEmbedder(std::vector<std::string> command, int dim)
    : process_(std::move(command)), dim_(dim) {
  require(dim_ >= 1, ErrorCode::kConfig, "plugin embedder dim must be positive");
}

torch::Tensor PluginEmbedder::embed(const Waveform& w) {
  require(!w.empty(), ErrorCode::kInvalidInput, "cannot embed an empty waveform");
  const auto path = std::filesystem::temp_directory_path() /
                    ("gentse-embed-" + std::to_string(getpid()) + ".wav");
  write_wav(path, w, WavEncoding::kFloat32);
  nlohmann::json reply;
  try {
    reply = process_.request({{"wav_path", path.string()}});
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
  std::filesystem::remove(path);
  require(reply.contains("embedding") && reply["embedding"].is_array(), ErrorCode::kPlugin,
          "embedder reply lacks an 'embedding' array");
  const auto& arr = reply["embedding"];
  require(static_cast<int>(arr.size()) == dim_, ErrorCode::kPlugin,
          "embedder returned " + std::to_string(arr.size()) + " values, expected " + std::to_string(dim_));
  std::vector<float> v;
  for (const auto& x : arr) {
    require(x.is_number() && std::isfinite(x.get<double>()), ErrorCode::kPlugin, "non-finite embedding value");
    v.push_back(x.get<float>());
  }
  return torch::tensor(v);
}

}  // namespace gentse
