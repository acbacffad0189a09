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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gentse/model.h"
#include "gentse/trainer.h"

namespace gentse {

struct EvalConfig {
  int flow_steps = 10;
  OdeSolver solver = OdeSolver::kEuler;
  std::uint64_t seed = 0;
  int max_decode_len = 0;  // 0: decoder capacity
  // External scorer commands by name ("dnsmos", "sbs"); empty = absent.
  std::vector<std::string> dnsmos_command;
  std::vector<std::string> sbs_command;
  // Evaluation-side speaker embedder; empty = built-in mel statistics
  // (projected when paths.speaker_projection is set).
  std::vector<std::string> embedder_command;
  int embedder_dim = 0;
  std::size_t n_mixtures = 50;  // make-eval-set

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct PathsConfig {
  std::string train_manifest;
  std::string eval_manifest;
  std::string pairings;
  std::string pretrain_manifest;
  std::string base_weights;
  // Fitted projection for the built-in evaluation embedder; empty = raw
  // mel statistics.
  std::string speaker_projection;
  std::string output_root = "runs";

  friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  PretrainConfig pretrain;
  EvalConfig eval;
  PathsConfig paths;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// JSON views. Readers reject unknown keys (kConfig naming the dotted path)
// and leave absent keys at their defaults.
nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const RunConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
// GENTSE_SEED overrides every seed; GENTSE_OUTPUT_ROOT the output root.
void apply_environment(RunConfig& c);

std::string canonical_json(const nlohmann::json& j);
// 16 hex digits: fnv1a64 of the canonical JSON.
std::string fingerprint(const RunConfig& c);
std::string fingerprint(const ModelConfig& c);

}  // namespace gentse
