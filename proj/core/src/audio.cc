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

#include "gentse/audio.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "gentse/error.h"

namespace gentse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t offset) {
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

void Waveform::validate() const {
  require(sample_rate > 0, ErrorCode::kInvalidInput, "sample rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      fail(ErrorCode::kInvalidInput, "non-finite sample at index " + std::to_string(i));
    }
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorCode::kParse, path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* id = buf.data() + pos;
    auto len = read_le<std::uint32_t>(buf, pos + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16 || body + 16 > buf.size()) fail(ErrorCode::kParse, path.string() + ": short fmt chunk");
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && len >= 40 && body + 26 <= buf.size()) {
        format = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      // 0xFFFFFFFF marks a stream whose writer never patched the size.
      if (len != 0xFFFFFFFFu && body + len > buf.size()) {
        fail(ErrorCode::kParse, path.string() + ": data chunk truncated (" + std::to_string(buf.size() - body) +
                                    " of " + std::to_string(len) + " bytes)");
      }
      data_len = std::min<std::size_t>(len, buf.size() - body);
      have_data = true;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt || !have_data) fail(ErrorCode::kParse, path.string() + ": missing fmt or data chunk");
  if (channels != 1) {
    fail(ErrorCode::kMultichannel, path.string() + ": " + std::to_string(channels) + " channels");
  }
  bool pcm16 = format == kFormatPcm && bits == 16;
  bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail(ErrorCode::kUnsupportedEncoding, path.string() + ": format " + std::to_string(format) +
                                              " with " + std::to_string(bits) + " bits");
  }
  std::size_t width = bits / 8;
  std::size_t n = data_len / width;
  if (n == 0) fail(ErrorCode::kParse, path.string() + ": empty data chunk");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (pcm16) {
      w.samples[i] = static_cast<float>(read_le<std::int16_t>(buf, data_off + 2 * i)) / 32768.0f;
    } else {
      w.samples[i] = read_le<float>(buf, data_off + 4 * i);
    }
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  w.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");

  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(w.samples.size() * block);

  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, pcm16 ? kFormatPcm : kFormatFloat);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * block);
  put<std::uint16_t>(out, block);
  put<std::uint16_t>(out, bits);
  out.write("data", 4);
  put<std::uint32_t>(out, data_len);
  for (float s : w.samples) {
    if (pcm16) {
      double q = std::nearbyint(static_cast<double>(s) * 32768.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0)));
    } else {
      put<float>(out, s);
    }
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

double mean_square(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

double rms(std::span<const float> x) { return std::sqrt(mean_square(x)); }

float peak(std::span<const float> x) {
  float p = 0.0f;
  for (float v : x) p = std::max(p, std::abs(v));
  return p;
}

Waveform resample_integer(const Waveform& w, int target_rate) {
  require(target_rate > 0, ErrorCode::kInvalidInput, "target rate must be positive");
  if (w.sample_rate == target_rate) return w;
  const bool down = w.sample_rate > target_rate;
  const int hi = std::max(w.sample_rate, target_rate);
  const int lo = std::min(w.sample_rate, target_rate);
  if (hi % lo != 0) {
    fail(ErrorCode::kInvalidInput, "rate ratio " + std::to_string(w.sample_rate) + "/" +
                                       std::to_string(target_rate) + " is not an integer");
  }
  const int factor = hi / lo;

  // Low-pass at the lower Nyquist, Hann-windowed sinc.
  const int half = 16 * factor;
  std::vector<double> h(2 * half + 1);
  for (int i = -half; i <= half; ++i) {
    double x = static_cast<double>(i) / factor;
    double sinc = i == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    double win = 0.5 + 0.5 * std::cos(std::numbers::pi * i / (half + 1));
    h[i + half] = sinc * win / factor;
  }

  std::vector<double> in(w.samples.begin(), w.samples.end());
  if (!down) {
    std::vector<double> up(in.size() * factor, 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) up[i * factor] = in[i] * factor;
    in.swap(up);
  }
  const std::size_t n_out = down ? in.size() / factor : in.size();
  const std::size_t stride = down ? factor : 1;
  std::vector<float> out(n_out);
  for (std::size_t o = 0; o < n_out; ++o) {
    const auto c = static_cast<std::ptrdiff_t>(o * stride);
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) {
      std::ptrdiff_t idx = c - k;
      if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(in.size())) acc += h[k + half] * in[idx];
    }
    out[o] = static_cast<float>(acc);
  }
  return Waveform(std::move(out), target_rate);
}

}  // namespace gentse
