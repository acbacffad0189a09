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

#include "gentse/toy_corpus.h"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "gentse/error.h"

namespace gentse {
namespace {

struct CharSound {
  double f1 = 0.0;     // first resonance, Hz (0: unvoiced)
  double f2 = 0.0;     // second resonance, Hz
  double noise = 0.0;  // centre of a noise band, Hz (0: none)
};

// Fixed acoustic pattern per character. Letters take distinct (F1, F2)
// pairs on a coarse grid; a few add a high noise band.
CharSound sound_of(char c) {
  static const std::string kLetters = "abcdefghijklmnopqrstuvwxyz'";
  const auto pos = kLetters.find(c);
  if (pos == std::string::npos) return {};
  const int i = static_cast<int>(pos);
  CharSound s;
  s.f1 = 300.0 + 110.0 * (i % 6);
  s.f2 = 950.0 + 260.0 * ((i * 5) % 7);
  if (c == 's' || c == 'z' || c == 'f' || c == 'h' || c == 'k' || c == 't' || c == 'p' || c == 'x') {
    s.noise = 3200.0 + 380.0 * (i % 8);
  }
  return s;
}

double resonance(double f, double centre, double bandwidth) {
  const double d = (f - centre) / bandwidth;
  return std::exp(-0.5 * d * d);
}

}  // namespace

std::vector<ToySpeaker> make_toy_speakers(const ToyCorpusConfig& cfg) {
  require(cfg.n_speakers >= 1, ErrorCode::kConfig, "n_speakers must be >= 1");
  Rng rng(derive_seed(cfg.speaker_seed ? cfg.speaker_seed : cfg.seed, 0x73706b, 0));
  std::vector<ToySpeaker> out;
  for (int s = 0; s < cfg.n_speakers; ++s) {
    ToySpeaker sp;
    char id[64];
    std::snprintf(id, sizeof id, "%s%02d", cfg.speaker_prefix.c_str(), s);
    sp.id = id;
    // Spread f0 over 90-260 Hz on a jittered grid so neighbours differ.
    const double frac = (s + 0.2 + 0.6 * rng.uniform()) / cfg.n_speakers;
    sp.f0 = 90.0 * std::pow(260.0 / 90.0, frac);
    sp.formant_scale = rng.uniform(0.85, 1.2);
    sp.tilt_db_per_khz = rng.uniform(-6.0, -1.0);
    sp.rate = rng.uniform(0.85, 1.15);
    out.push_back(sp);
  }
  return out;
}

std::string make_toy_sentence(const ToyCorpusConfig& cfg, Rng& rng) {
  require(!cfg.vocabulary.empty() && cfg.min_words >= 1 && cfg.max_words >= cfg.min_words, ErrorCode::kConfig,
          "toy vocabulary/word counts invalid");
  const auto n = cfg.min_words + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_words - cfg.min_words + 1)));
  std::string s;
  for (int w = 0; w < n; ++w) {
    if (w) s += ' ';
    s += cfg.vocabulary[rng.below(cfg.vocabulary.size())];
  }
  return s;
}

Waveform synthesize_toy_utterance(const std::string& text, const ToySpeaker& speaker, const ToyCorpusConfig& cfg,
                                  Rng& rng) {
  const double sr = cfg.sample_rate;
  const double nyquist_guard = 0.45 * sr;
  const double lead = 0.04;
  std::vector<double> y(static_cast<std::size_t>(lead * sr), 0.0);
  const double f0 = speaker.f0 * rng.uniform(0.97, 1.03);
  double t = static_cast<double>(y.size()) / sr;
  const double ramp = 0.008;
  for (char c : text) {
    const bool space = c == ' ';
    const double dur = (space ? cfg.space_seconds : cfg.char_seconds) * speaker.rate * rng.uniform(0.9, 1.1);
    const auto n = static_cast<std::size_t>(dur * sr);
    if (space) {
      y.resize(y.size() + n, 0.0);
      t += static_cast<double>(n) / sr;
      continue;
    }
    const auto snd = sound_of(c);
    const double f1 = snd.f1 * speaker.formant_scale, f2 = snd.f2 * speaker.formant_scale;
    std::vector<double> amps;
    for (int k = 1; k * f0 < nyquist_guard; ++k) {
      const double f = k * f0;
      const double env = resonance(f, f1, 90.0) + 0.7 * resonance(f, f2, 140.0) + 0.02;
      amps.push_back(env * std::pow(10.0, speaker.tilt_db_per_khz * f / 1000.0 / 20.0));
    }
    // Noise band as a sum of random-phase partials.
    std::vector<std::pair<double, double>> partials;
    if (snd.noise > 0.0) {
      for (int p = 0; p < 24; ++p) {
        partials.emplace_back(snd.noise * speaker.formant_scale + rng.uniform(-450.0, 450.0),
                              rng.uniform(0.0, 2.0 * std::numbers::pi));
      }
    }
    const auto start = y.size();
    y.resize(start + n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double tt = t + static_cast<double>(i) / sr;
      const double local = static_cast<double>(i) / sr;
      double g = 1.0;
      if (local < ramp) g = 0.5 - 0.5 * std::cos(std::numbers::pi * local / ramp);
      if (dur - local < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(std::numbers::pi * (dur - local) / ramp));
      double v = 0.0;
      for (std::size_t k = 0; k < amps.size(); ++k) v += amps[k] * std::sin(2.0 * std::numbers::pi * (k + 1) * f0 * tt);
      for (const auto& [f, ph] : partials) v += 0.06 * std::sin(2.0 * std::numbers::pi * f * tt + ph);
      y[start + i] = g * v;
    }
    t += static_cast<double>(n) / sr;
  }
  y.resize(y.size() + static_cast<std::size_t>(lead * sr), 0.0);

  double pk = 0.0;
  for (double v : y) pk = std::max(pk, std::abs(v));
  const double gain = pk > 0.0 ? 0.5 / pk : 1.0;
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    // Box-Muller pair, one value used: keeps the draw count fixed per sample.
    const double u1 = std::max(rng.uniform(), 1e-300), u2 = rng.uniform();
    const double noise = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    w.samples[i] = static_cast<float>(gain * y[i] + cfg.noise_rms * noise);
  }
  return w;
}

std::vector<UtteranceRecord> write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg) {
  require(cfg.utterances_per_speaker >= 1, ErrorCode::kConfig, "utterances_per_speaker must be >= 1");
  const auto speakers = make_toy_speakers(cfg);
  std::filesystem::create_directories(dir / "wav");
  std::vector<UtteranceRecord> records;
  // Interleave speakers so manifest order alternates talkers.
  for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
    for (std::size_t s = 0; s < speakers.size(); ++s) {
      Rng rng(derive_seed(cfg.seed, s + 1, static_cast<std::uint64_t>(u)));
      UtteranceRecord r;
      char id[96];
      std::snprintf(id, sizeof id, "%s_%03d", speakers[s].id.c_str(), u);
      r.id = id;
      r.speaker_id = speakers[s].id;
      r.text = make_toy_sentence(cfg, rng);
      auto w = synthesize_toy_utterance(r.text, speakers[s], cfg, rng);
      r.path = std::filesystem::path("wav") / (r.id + ".wav");
      write_wav(dir / r.path, w);
      r.duration_s = w.duration_s();
      records.push_back(std::move(r));
    }
  }
  write_manifest(dir / "manifest.jsonl", records);
  return records;
}

}  // namespace gentse
