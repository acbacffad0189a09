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

#include <torch/types.h>

#include "gentse/audio.h"

namespace gentse {

enum class LogBase { kNatural, kTen };

// STFT + mel analysis settings. Defaults follow Whisper-style analysis:
// 25 ms Hann window, 10 ms hop, 80 Slaney-scale mel bands at 16 kHz.
struct FeatureConfig {
  int sample_rate = 16000;
  int n_fft = 400;
  int win_length = 400;
  int hop_length = 160;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 selects sample_rate / 2
  double log_floor = 1e-10;
  LogBase log_base = LogBase::kNatural;

  void validate() const;
  int n_freqs() const { return n_fft / 2 + 1; }
  double effective_f_max() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  // Frame count produced for `n_samples` input samples: ceil(n / hop).
  std::int64_t frames_for(std::size_t n_samples) const;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// d_f x T log-mel energies, float32, row = mel band.
struct LogMelSpectrogram {
  torch::Tensor values;
  int hop_length = 160;
  int win_length = 400;

  int n_mels() const { return static_cast<int>(values.size(0)); }
  std::int64_t frames() const { return values.size(1); }
  void validate() const;
};

// Triangular Slaney-scale filters with Slaney area normalisation, shape
// [n_mels, n_fft/2 + 1]. Built once per distinct config and cached.
class MelFilterbank {
 public:
  static std::shared_ptr<const MelFilterbank> get(const FeatureConfig& cfg);

  explicit MelFilterbank(const FeatureConfig& cfg);

  const torch::Tensor& weights() const { return weights_; }  // float64
  // First and one-past-last nonzero FFT bin of each filter.
  int begin(int band) const { return ranges_[band].first; }
  int end(int band) const { return ranges_[band].second; }
  double center_hz(int band) const { return centers_[band]; }

 private:
  torch::Tensor weights_;
  std::vector<std::pair<int, int>> ranges_;
  std::vector<double> centers_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic Hann window of win_length, zero-padded to n_fft and centred.
torch::Tensor analysis_window(const FeatureConfig& cfg);

// Complex STFT with frames centred at k * hop (k = 0 .. ceil(n/hop) - 1);
// samples outside the signal count as zero. Shape [n_freqs, T], complex128.
torch::Tensor stft(std::span<const float> samples, const FeatureConfig& cfg);
// Weighted overlap-add inverse of `stft`, producing exactly T * hop samples.
std::vector<float> istft(const torch::Tensor& spec, const FeatureConfig& cfg);

// log(max(mel_power, floor)). Throws kInvalidInput on an empty or non-finite
// waveform or a sample-rate mismatch with the config.
LogMelSpectrogram compute_log_mel(const Waveform& w, const FeatureConfig& cfg);

struct VocoderConfig {
  int n_iter = 32;
  // Multiplicative-update iterations used to invert the mel projection.
  int mel_inverse_iter = 32;

  friend bool operator==(const VocoderConfig&, const VocoderConfig&) = default;
};

// Mel -> waveform plug-in point.
class Vocoder {
 public:
  virtual ~Vocoder() = default;
  virtual Waveform vocode(const LogMelSpectrogram& mel) const = 0;
};

// Iterative phase reconstruction (Griffin-Lim) from a zero-phase start.
class GriffinLimVocoder final : public Vocoder {
 public:
  GriffinLimVocoder(FeatureConfig features, VocoderConfig cfg);

  Waveform vocode(const LogMelSpectrogram& mel) const override;

  // Non-negative linear power spectrum [n_freqs, T] whose mel projection
  // approximates `mel`.
  torch::Tensor invert_mel(const LogMelSpectrogram& mel) const;

 private:
  FeatureConfig features_;
  VocoderConfig cfg_;
};

}  // namespace gentse
