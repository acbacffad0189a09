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
#include <optional>
#include <string>
#include <vector>

#include "gentse/embedder.h"
#include "gentse/model.h"
#include "gentse/plugin.h"

namespace gentse {

// Produces the hypothesis transcript for one extraction.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string name() const = 0;
  virtual std::string transcribe(const Extraction& extraction) = 0;
};

// Greedy decoding with the model's own text decoder from the target speech
// tokens (no teacher forcing). Scores from it are not comparable with
// numbers obtained with an external recogniser.
class SelfDecoderTranscriber final : public Transcriber {
 public:
  SelfDecoderTranscriber(TseModelImpl& model, int max_len = 0) : model_(model), max_len_(max_len) {}
  std::string name() const override { return "self-decoder"; }
  std::string transcribe(const Extraction& extraction) override;

 private:
  TseModelImpl& model_;
  int max_len_;
};

// External recogniser: request {"wav_path"}, reply {"text"}.
class PluginTranscriber final : public Transcriber {
 public:
  explicit PluginTranscriber(std::vector<std::string> command) : process_(std::move(command)) {}
  std::string name() const override { return "plugin:" + process_.argv().front(); }
  std::string transcribe(const Extraction& extraction) override;

 private:
  PluginProcess process_;
};

// Reference-free or reference-based quality scorer behind the plug-in
// protocol. Request {"wav_path", "ref_path"}; reply {"score": x} or
// {"scores": {"sig": .., "bak": .., "ovl": ..}}.
class ScorerPlugin {
 public:
  ScorerPlugin(std::string name, std::vector<std::string> command,
               std::chrono::milliseconds timeout = std::chrono::seconds(60));
  const std::string& name() const { return name_; }
  nlohmann::json score(const std::filesystem::path& wav, const std::filesystem::path& ref);

 private:
  std::string name_;
  PluginProcess process_;
};

struct EvalRow {
  std::string example_id;
  std::string target_speaker;
  double snr_db = 0.0;
  std::string transcriber;
  double wer = 0.0;
  std::optional<double> cos_sim;          // prediction vs clean target
  std::optional<double> cos_sim_mixture;  // mixture vs clean target (control)
  std::optional<double> dnsmos_sig, dnsmos_bak, dnsmos_ovl;
  std::optional<double> sbs;
  std::string hyp;
  std::string ref;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalAggregates {
  std::size_t rows = 0;
  std::optional<double> wer, cos_sim, cos_sim_mixture, dnsmos_sig, dnsmos_bak, dnsmos_ovl, sbs;
};

struct BenchmarkOptions {
  PromptSwitches switches;
  int flow_steps = 10;
  OdeSolver solver = OdeSolver::kEuler;
  std::uint64_t seed = 0;
  // When set, predictions are written as <id>.wav and hypotheses as <id>.txt.
  std::optional<std::filesystem::path> output_dir;
};

struct BenchmarkScorers {
  ScorerPlugin* dnsmos = nullptr;
  ScorerPlugin* sbs = nullptr;
};

struct BenchmarkResult {
  std::vector<EvalRow> rows;
  EvalAggregates aggregates;
  std::vector<std::string> warnings;
  std::vector<Extraction> extractions;  // same order as rows
};

// Extracts every example, transcribes it, scores it. Scorer or embedder
// failures null the affected cells and add a warning; the run continues.
// Rows are ordered by example id.
BenchmarkResult run_benchmark(TseModelImpl& model, const std::vector<MixtureExample>& examples,
                              SpeakerEmbedder& embedder, Transcriber& transcriber, const Vocoder& vocoder,
                              const BenchmarkOptions& options, BenchmarkScorers scorers = {});

// Means of the non-null cells of each column (WER over finite values).
EvalAggregates aggregate(const std::vector<EvalRow>& rows);

// Header:
// example_id,target_speaker,snr_db,transcriber,wer,cos_sim,cos_sim_mixture,
// dnsmos_sig,dnsmos_bak,dnsmos_ovl,sbs,hyp,ref
// Empty cell = null. Reals use 17 significant digits; WER is a fraction.
std::string results_csv(const std::vector<EvalRow>& rows);
void write_results_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_results_csv(const std::filesystem::path& path);

// Table-1 style summary line per named system.
std::string format_table(const std::vector<std::pair<std::string, EvalAggregates>>& systems,
                         const std::string& transcriber);

}  // namespace gentse
