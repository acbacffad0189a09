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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gentse/audio.h"
#include "gentse/rng.h"

namespace gentse {

struct UtteranceRecord {
  std::string id;
  std::filesystem::path path;
  std::string speaker_id;
  std::string text;
  double duration_s = 0.0;
};

// Manifest-backed utterance collection. Relative audio paths resolve
// against the manifest's directory.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<UtteranceRecord> records, std::filesystem::path root = {});

  const std::vector<UtteranceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const UtteranceRecord& at(std::size_t i) const { return records_.at(i); }
  // kResolution when the id is unknown.
  std::size_t index_of(const std::string& id) const;
  const std::vector<std::string>& speakers() const { return speakers_; }
  const std::vector<std::size_t>& utterances_of(const std::string& speaker) const;

  std::filesystem::path resolve(const UtteranceRecord& r) const;
  // Reads the WAV for record i; kResolution when the file is missing.
  Waveform load(std::size_t i) const;
  // Reads every utterance into memory; later load() calls hit the cache.
  void preload();

 private:
  std::vector<UtteranceRecord> records_;
  std::filesystem::path root_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::size_t>> by_speaker_;
  std::vector<std::string> speakers_;  // first-appearance order
  std::vector<Waveform> audio_;
};

// JSON-Lines: {"id","path","speaker","text","duration"} per line.
// kParse carries the 1-based line number; kValidation for duplicate ids,
// empty speaker ids and non-positive durations.
Corpus load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);

struct MixResult {
  Waveform mixture;
  Waveform scaled_target;
  Waveform scaled_interferer;
  double interferer_scale = 1.0;  // before clip normalisation
  double clip_gain = 1.0;
  std::size_t target_length = 0;  // original (pre-padding) supports
  std::size_t interferer_length = 0;
};

// Trailing zero-pad to a common length, rescale the interferer so that the
// power ratio over each signal's original support equals snr_db, sum, and
// scale everything jointly if the mixture peak exceeds 0.99.
// mixture[i] == scaled_target[i] + scaled_interferer[i] exactly.
MixResult mix_at_snr(const Waveform& target, const Waveform& interferer, double snr_db);

// Keep the first round(seconds * rate) samples, zero-padding at the end.
Waveform fix_length(const Waveform& w, double seconds);
// Random-offset crop for training when the input is longer than requested.
Waveform fix_length_random(const Waveform& w, double seconds, Rng& rng);

struct MixtureExample {
  std::string id;
  Waveform mixture;
  Waveform target;      // scaled target as it appears in the mixture
  Waveform interferer;  // scaled interferer as it appears in the mixture
  Waveform enrollment;
  std::string target_speaker_id;
  std::string target_utterance_id;
  std::string interferer_utterance_id;
  std::string enrollment_utterance_id;
  std::string transcript;
  double snr_db = 0.0;
};

struct SamplerConfig {
  double snr_min_db = -5.0;
  double snr_max_db = 5.0;
  double enroll_seconds = 5.0;
  bool random_enroll_crop = false;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

// Checks the dynamic-mixing preconditions: >= 2 speakers, and every
// speaker with a utterance used as target has >= 2 utterances.
// kCorpus names the offending speaker.
void validate_for_mixing(const Corpus& corpus);

// Target drawn uniformly over utterances; interferer from a different
// speaker; SNR ~ U[snr_min, snr_max]; enrollment a different utterance of
// the target speaker, length-fixed. Fully determined by the rng state.
MixtureExample sample_training_example(const Corpus& corpus, Rng& rng, const SamplerConfig& cfg = {});
// Same, with the target fixed (used for manifest-order epochs).
MixtureExample sample_example_for_target(const Corpus& corpus, std::size_t target_index, Rng& rng,
                                         const SamplerConfig& cfg = {});

// One fixed evaluation mixture. Each entry yields two examples with the
// target alternated; the second uses interferer_enroll_id as its cue.
struct PairingEntry {
  std::string target_id;
  std::string interferer_id;
  std::string enroll_id;
  std::string interferer_enroll_id;  // empty -> first other utterance of that speaker
  double snr_db = 0.0;
};

std::vector<PairingEntry> load_pairings(const std::filesystem::path& path);
void write_pairings(const std::filesystem::path& path, const std::vector<PairingEntry>& pairs);
// Deterministic pairings for `n_mixtures` mixtures.
std::vector<PairingEntry> make_pairings(const Corpus& corpus, std::size_t n_mixtures, std::uint64_t seed,
                                        const SamplerConfig& cfg = {});
// 2N examples, ordered (mixture 0 target A, mixture 0 target B, ...).
// Enrollment is the first enroll_seconds (no random crop).
std::vector<MixtureExample> build_eval_set(const Corpus& corpus, const std::vector<PairingEntry>& pairs,
                                           const SamplerConfig& cfg = {});

}  // namespace gentse
