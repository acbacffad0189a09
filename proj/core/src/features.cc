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

#include "gentse/features.h"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include <torch/fft.h>
#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {
namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kMinLogMel = 15.0;
constexpr double kLinScale = 200.0 / 3.0;
const double kLogStep = std::log(6.4) / 27.0;

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);

// [T, n_fft] windowed frames of a float64 signal.
torch::Tensor frame_signal(const double* x, std::int64_t n, std::int64_t n_frames,
                           const FeatureConfig& cfg, const torch::Tensor& window) {
  auto frames = torch::zeros({n_frames, cfg.n_fft}, kF64);
  auto fa = frames.accessor<double, 2>();
  auto wa = window.accessor<double, 1>();
  const std::int64_t half = cfg.n_fft / 2;
  for (std::int64_t k = 0; k < n_frames; ++k) {
    const std::int64_t start = k * cfg.hop_length - half;
    for (std::int64_t m = 0; m < cfg.n_fft; ++m) {
      const std::int64_t s = start + m;
      if (s >= 0 && s < n) fa[k][m] = x[s] * wa[m];
    }
  }
  return frames;
}

torch::Tensor stft_f64(const double* x, std::int64_t n, std::int64_t n_frames,
                       const FeatureConfig& cfg, const torch::Tensor& window) {
  auto frames = frame_signal(x, n, n_frames, cfg, window);
  return torch::fft::rfft(frames, cfg.n_fft, 1).t().contiguous();
}

std::vector<double> istft_f64(const torch::Tensor& spec, const FeatureConfig& cfg,
                              const torch::Tensor& window) {
  const std::int64_t n_frames = spec.size(1);
  auto frames = torch::fft::irfft(spec.t().contiguous(), cfg.n_fft, 1).contiguous();
  auto fa = frames.accessor<double, 2>();
  auto wa = window.accessor<double, 1>();
  const std::int64_t n_out = n_frames * cfg.hop_length;
  const std::int64_t half = cfg.n_fft / 2;
  std::vector<double> y(n_out, 0.0), wsum(n_out, 0.0);
  for (std::int64_t k = 0; k < n_frames; ++k) {
    const std::int64_t start = k * cfg.hop_length - half;
    for (std::int64_t m = 0; m < cfg.n_fft; ++m) {
      const std::int64_t s = start + m;
      if (s < 0 || s >= n_out) continue;
      y[s] += wa[m] * fa[k][m];
      wsum[s] += wa[m] * wa[m];
    }
  }
  for (std::int64_t s = 0; s < n_out; ++s) {
    if (wsum[s] > 1e-10) y[s] /= wsum[s];
  }
  return y;
}

using FilterbankKey = std::tuple<int, int, int, double, double>;

}  // namespace

void FeatureConfig::validate() const {
  require(sample_rate > 0, ErrorCode::kConfig, "sample_rate must be positive");
  require(n_mels >= 1, ErrorCode::kConfig, "n_mels must be >= 1");
  require(hop_length >= 1, ErrorCode::kConfig, "hop_length must be >= 1");
  require(win_length >= hop_length, ErrorCode::kConfig, "win_length must be >= hop_length");
  require(n_fft >= win_length, ErrorCode::kConfig, "n_fft must be >= win_length");
  require(log_floor > 0.0, ErrorCode::kConfig, "log_floor must be positive");
  require(f_min >= 0.0 && effective_f_max() > f_min && effective_f_max() <= sample_rate / 2.0,
          ErrorCode::kConfig, "mel band edges out of range");
}

std::int64_t FeatureConfig::frames_for(std::size_t n_samples) const {
  return static_cast<std::int64_t>((n_samples + hop_length - 1) / hop_length);
}

void LogMelSpectrogram::validate() const {
  require(values.defined() && values.dim() == 2 && values.size(1) >= 1, ErrorCode::kInvalidInput,
          "log-mel must be a d_f x T matrix with T >= 1");
  require(torch::isfinite(values).all().item<bool>(), ErrorCode::kInvalidInput,
          "log-mel has non-finite entries");
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinScale;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinScale;
  return kMinLogHz * std::exp((mel - kMinLogMel) * kLogStep);
}

MelFilterbank::MelFilterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const int n_freqs = cfg.n_freqs();
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.effective_f_max());
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  weights_ = torch::zeros({cfg.n_mels, n_freqs}, kF64);
  auto wa = weights_.accessor<double, 2>();
  ranges_.resize(cfg.n_mels);
  centers_.resize(cfg.n_mels);
  for (int b = 0; b < cfg.n_mels; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    const double enorm = 2.0 / (hi - lo);
    centers_[b] = mid;
    int first = n_freqs, last = 0;
    for (int f = 0; f < n_freqs; ++f) {
      const double hz = static_cast<double>(f) * cfg.sample_rate / cfg.n_fft;
      const double w = std::max(0.0, std::min((hz - lo) / (mid - lo), (hi - hz) / (hi - mid)));
      if (w > 0.0) {
        wa[b][f] = w * enorm;
        first = std::min(first, f);
        last = f + 1;
      }
    }
    ranges_[b] = {first, std::max(first, last)};
  }
}

std::shared_ptr<const MelFilterbank> MelFilterbank::get(const FeatureConfig& cfg) {
  static std::mutex mu;
  static std::map<FilterbankKey, std::shared_ptr<const MelFilterbank>> cache;
  FilterbankKey key{cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.f_min, cfg.effective_f_max()};
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<MelFilterbank>(cfg)).first;
  return it->second;
}

torch::Tensor analysis_window(const FeatureConfig& cfg) {
  auto w = torch::zeros({cfg.n_fft}, kF64);
  auto wa = w.accessor<double, 1>();
  const int offset = (cfg.n_fft - cfg.win_length) / 2;
  for (int i = 0; i < cfg.win_length; ++i) {
    wa[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win_length);
  }
  return w;
}

torch::Tensor stft(std::span<const float> samples, const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<double> x(samples.begin(), samples.end());
  return stft_f64(x.data(), static_cast<std::int64_t>(x.size()), cfg.frames_for(x.size()), cfg,
                  analysis_window(cfg));
}

std::vector<float> istft(const torch::Tensor& spec, const FeatureConfig& cfg) {
  cfg.validate();
  require(spec.dim() == 2 && spec.size(0) == cfg.n_freqs(), ErrorCode::kInvalidInput,
          "spectrum must have n_fft/2+1 rows");
  auto y = istft_f64(spec.to(torch::kComplexDouble), cfg, analysis_window(cfg));
  return {y.begin(), y.end()};
}

LogMelSpectrogram compute_log_mel(const Waveform& w, const FeatureConfig& cfg) {
  cfg.validate();
  require(!w.empty(), ErrorCode::kInvalidInput, "empty waveform");
  w.validate();
  require(w.sample_rate == cfg.sample_rate, ErrorCode::kInvalidInput,
          "waveform rate " + std::to_string(w.sample_rate) + " != feature rate " +
              std::to_string(cfg.sample_rate));

  auto fb = MelFilterbank::get(cfg);
  auto spec = stft(w.samples, cfg);
  auto power = (torch::real(spec).square() + torch::imag(spec).square()).contiguous();
  auto pa = power.accessor<double, 2>();
  auto wa = fb->weights().accessor<double, 2>();

  const std::int64_t n_frames = power.size(1);
  auto out = torch::empty({cfg.n_mels, n_frames}, torch::kFloat32);
  auto oa = out.accessor<float, 2>();
  const double to_log10 = 1.0 / std::log(10.0);
  for (int b = 0; b < cfg.n_mels; ++b) {
    for (std::int64_t k = 0; k < n_frames; ++k) {
      double e = 0.0;
      for (int f = fb->begin(b); f < fb->end(b); ++f) e += wa[b][f] * pa[f][k];
      double v = std::log(std::max(e, cfg.log_floor));
      if (cfg.log_base == LogBase::kTen) v *= to_log10;
      oa[b][k] = static_cast<float>(v);
    }
  }
  return {out, cfg.hop_length, cfg.win_length};
}

GriffinLimVocoder::GriffinLimVocoder(FeatureConfig features, VocoderConfig cfg)
    : features_(features), cfg_(cfg) {
  features_.validate();
  require(cfg_.n_iter >= 0 && cfg_.mel_inverse_iter >= 0, ErrorCode::kInvalidInput,
          "iteration counts must be non-negative");
}

torch::Tensor GriffinLimVocoder::invert_mel(const LogMelSpectrogram& mel) const {
  require(mel.values.defined() && mel.values.dim() == 2, ErrorCode::kInvalidInput,
          "mel must be a matrix");
  require(mel.n_mels() == features_.n_mels && mel.hop_length == features_.hop_length &&
              mel.win_length == features_.win_length,
          ErrorCode::kInvalidInput, "mel shape does not match vocoder config");
  auto fb = MelFilterbank::get(features_)->weights();
  auto logv = mel.values.to(torch::kFloat64);
  if (features_.log_base == LogBase::kTen) logv = logv * std::log(10.0);
  auto target = torch::exp(logv);  // [M, T]

  auto wt = fb.t();  // [F, M]
  auto numer = torch::matmul(wt, target);
  auto colsum = wt.sum(1, true);
  auto p = torch::where(colsum > 0, numer / colsum.clamp_min(1e-30), torch::zeros_like(numer));
  for (int i = 0; i < cfg_.mel_inverse_iter; ++i) {
    auto denom = torch::matmul(wt, torch::matmul(fb, p));
    p = p * numer / (denom + 1e-30);
  }
  return p;
}

Waveform GriffinLimVocoder::vocode(const LogMelSpectrogram& mel) const {
  auto power = invert_mel(mel);
  auto mag = torch::sqrt(power);
  auto window = analysis_window(features_);
  const std::int64_t n_frames = mag.size(1);

  auto spec = torch::complex(mag, torch::zeros_like(mag));
  for (int it = 0; it < cfg_.n_iter; ++it) {
    auto x = istft_f64(spec, features_, window);
    auto rebuilt = stft_f64(x.data(), static_cast<std::int64_t>(x.size()), n_frames, features_, window);
    auto phase = rebuilt / rebuilt.abs().clamp_min(1e-12);
    spec = mag * phase;
  }
  auto y = istft_f64(spec, features_, window);
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = std::isfinite(y[i]) ? static_cast<float>(y[i]) : 0.0f;
  }
  return Waveform(std::move(out), features_.sample_rate);
}

}  // namespace gentse
