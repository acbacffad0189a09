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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace gentse {

// Mono audio. Samples are nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  Waveform() = default;
  Waveform(std::vector<float> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Throws kInvalidInput on a non-positive rate or non-finite samples.
  void validate() const;

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

enum class WavEncoding { kPcm16, kFloat32 };

// RIFF/WAVE, mono, PCM16 or IEEE float32. Errors: kMissingFile,
// kUnsupportedEncoding, kMultichannel, kParse (truncated or empty data).
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavEncoding encoding = WavEncoding::kPcm16);

double mean_square(std::span<const float> x);
double rms(std::span<const float> x);
float peak(std::span<const float> x);

// Integer-ratio rate conversion (e.g. 48k -> 16k) with a windowed-sinc
// low-pass. Throws kInvalidInput when the ratio is not an integer.
Waveform resample_integer(const Waveform& w, int target_rate);

}  // namespace gentse
