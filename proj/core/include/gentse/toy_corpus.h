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
#include <string>
#include <vector>

#include "gentse/audio.h"
#include "gentse/mixing.h"
#include "gentse/rng.h"

namespace gentse {

// A synthetic talker: harmonic source at f0 shaped by per-character
// formant pairs, scaled by formant_scale, with a spectral tilt.
struct ToySpeaker {
  std::string id;
  double f0 = 120.0;
  double formant_scale = 1.0;
  double tilt_db_per_khz = -3.0;
  double rate = 1.0;  // speaking-rate multiplier on segment durations
};

struct ToyCorpusConfig {
  int sample_rate = 16000;
  int n_speakers = 6;
  int utterances_per_speaker = 40;
  int min_words = 2;
  int max_words = 3;
  double char_seconds = 0.08;
  double space_seconds = 0.05;
  double noise_rms = 1e-3;
  std::string speaker_prefix = "spk";
  std::uint64_t seed = 1;
  // Voices are drawn from speaker_seed (0: seed), so corpora with different
  // seeds can share talkers.
  std::uint64_t speaker_seed = 0;
  std::vector<std::string> vocabulary{"red", "blue", "green", "one", "two", "six",  "cat", "dog",
                                      "sun", "map",  "box",   "pin", "top", "jet",  "fog", "win",
                                      "hat", "lid",  "cup",   "van", "zip", "wolf", "kite", "mud"};
};

std::vector<ToySpeaker> make_toy_speakers(const ToyCorpusConfig& cfg);
std::string make_toy_sentence(const ToyCorpusConfig& cfg, Rng& rng);
Waveform synthesize_toy_utterance(const std::string& text, const ToySpeaker& speaker, const ToyCorpusConfig& cfg,
                                  Rng& rng);

// Writes <dir>/wav/<id>.wav and <dir>/manifest.jsonl; utterance ids are
// <speaker>_<nnn>. Deterministic in cfg.seed.
std::vector<UtteranceRecord> write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg);

}  // namespace gentse
