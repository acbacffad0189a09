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

#include "gentse/model.h"
#include "gentse/toy_corpus.h"
#include "gentse/trainer.h"

namespace gentse::testing {

// A model small enough for per-test training runs.
inline ModelConfig tiny_model(int lora_rank = 2) {
  ModelConfig m;
  m.features.n_mels = 16;
  m.encoder.n_mels = 16;
  m.encoder.d_model = 16;
  m.encoder.n_layers = 1;
  m.encoder.n_heads = 2;
  m.encoder.max_frames = 400;
  m.encoder.max_enroll_frames = 400;
  m.encoder.d_speaker = 32;
  m.encoder.lora_rank = lora_rank;
  m.flow.width = 16;
  m.flow.n_blocks = 2;
  m.flow.time_dim = 8;
  m.decoder.d_model = 16;
  m.decoder.n_layers = 1;
  m.decoder.n_heads = 2;
  m.decoder.max_text_positions = 48;
  m.vocoder.n_iter = 4;
  m.vocoder.mel_inverse_iter = 4;
  m.norm = {-8.0, 4.0};
  m.init_seed = 3;
  return m;
}

inline TrainConfig tiny_train() {
  TrainConfig t;
  t.global_batch = 2;
  t.epochs = 2;
  t.lr_decay_epoch = 1;
  t.lr = 1e-3;
  t.seed = 5;
  t.sampler.enroll_seconds = 1.0;
  return t;
}

// Short one-word utterances from a few synthetic talkers.
inline Corpus tiny_corpus(const std::filesystem::path& dir, int speakers = 3, int utts = 3,
                          std::uint64_t seed = 1) {
  ToyCorpusConfig c;
  c.n_speakers = speakers;
  c.utterances_per_speaker = utts;
  c.min_words = 1;
  c.max_words = 1;
  c.seed = seed;
  write_toy_corpus(dir, c);
  auto corpus = load_manifest(dir / "manifest.jsonl");
  corpus.preload();
  return corpus;
}

}  // namespace gentse::testing
