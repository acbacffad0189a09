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

#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>

#include <torch/torch.h>

#include "gentse/features.h"
#include "helpers.h"

using namespace gentse;
using gentse::testing::code_of;
using gentse::testing::TempDir;

namespace {

// Slaney mel scale written from its definition: 3 mels per 200 Hz below
// 1 kHz, 27 mels per factor 6.4 above.
double ref_hz_to_mel(double hz) { return hz < 1000.0 ? hz * 3.0 / 200.0 : 15.0 + 27.0 * std::log(hz / 1000.0) / std::log(6.4); }
double ref_mel_to_hz(double m) { return m < 15.0 ? m * 200.0 / 3.0 : 1000.0 * std::pow(6.4, (m - 15.0) / 27.0); }

std::vector<std::vector<double>> ref_filterbank(const FeatureConfig& c) {
  const int nf = c.n_fft / 2 + 1;
  const double lo = ref_hz_to_mel(c.f_min), hi = ref_hz_to_mel(c.f_max > 0 ? c.f_max : c.sample_rate / 2.0);
  std::vector<std::vector<double>> w(c.n_mels, std::vector<double>(nf, 0.0));
  for (int b = 0; b < c.n_mels; ++b) {
    const double f0 = ref_mel_to_hz(lo + (hi - lo) * b / (c.n_mels + 1));
    const double f1 = ref_mel_to_hz(lo + (hi - lo) * (b + 1) / (c.n_mels + 1));
    const double f2 = ref_mel_to_hz(lo + (hi - lo) * (b + 2) / (c.n_mels + 1));
    for (int k = 0; k < nf; ++k) {
      const double hz = k * static_cast<double>(c.sample_rate) / c.n_fft;
      double v = 0.0;
      if (hz > f0 && hz <= f1) v = (hz - f0) / (f1 - f0);
      if (hz > f1 && hz < f2) v = (f2 - hz) / (f2 - f1);
      w[b][k] = v * 2.0 / (f2 - f0);
    }
  }
  return w;
}

// Direct DFT of Hann-windowed frames centred at k * hop with zeros outside.
std::vector<std::vector<double>> ref_log_mel(const std::vector<float>& x, const FeatureConfig& c) {
  const auto fb = ref_filterbank(c);
  const int n = c.n_fft, nf = n / 2 + 1;
  const std::int64_t frames = (static_cast<std::int64_t>(x.size()) + c.hop_length - 1) / c.hop_length;
  std::vector<double> win(n, 0.0);
  const int off = (n - c.win_length) / 2;
  for (int i = 0; i < c.win_length; ++i) win[off + i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / c.win_length));
  std::vector<std::vector<double>> out(c.n_mels, std::vector<double>(frames));
  for (std::int64_t t = 0; t < frames; ++t) {
    std::vector<double> power(nf);
    for (int k = 0; k < nf; ++k) {
      std::complex<double> acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const std::int64_t idx = t * c.hop_length - n / 2 + j;
        if (idx < 0 || idx >= static_cast<std::int64_t>(x.size())) continue;
        acc += x[idx] * win[j] * std::polar(1.0, -2.0 * M_PI * k * j / n);
      }
      power[k] = std::norm(acc);
    }
    for (int b = 0; b < c.n_mels; ++b) {
      double e = 0.0;
      for (int k = 0; k < nf; ++k) e += fb[b][k] * power[k];
      out[b][t] = std::log(std::max(e, c.log_floor));
    }
  }
  return out;
}

void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                   const std::vector<char>& data, std::uint32_t declared_data = 0) {
  std::ofstream f(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  const std::uint32_t rate = 16000;
  const std::uint32_t dsize = declared_data ? declared_data : static_cast<std::uint32_t>(data.size());
  f.write("RIFF", 4);
  u32(36 + dsize);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  f.write("data", 4);
  u32(dsize);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("slaney scale anchor points") {
    CHECK(hz_to_mel(0.0) == 0.0);
    CHECK(hz_to_mel(1000.0) == doctest::Approx(15.0).epsilon(1e-12));
    CHECK(hz_to_mel(6400.0) == doctest::Approx(42.0).epsilon(1e-12));
    CHECK(mel_to_hz(42.0) == doctest::Approx(6400.0).epsilon(1e-12));
    for (double hz : {37.0, 420.0, 999.0, 1001.0, 3777.0, 7999.0}) {
      CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
    }
  }

  TEST_CASE("filterbank matches the definition") {
    for (int n_mels : {40, 80}) {
      FeatureConfig c;
      c.n_mels = n_mels;
      const auto ref = ref_filterbank(c);
      auto w = MelFilterbank(c).weights();
      double err = 0.0;
      for (int b = 0; b < n_mels; ++b) {
        for (int k = 0; k < c.n_freqs(); ++k) err = std::max(err, std::abs(ref[b][k] - w[b][k].item<double>()));
      }
      CHECK(err < 1e-12);
    }
  }

  TEST_CASE("log-mel matches a direct DFT oracle") {
    Rng rng(3);
    FeatureConfig c;
    c.n_mels = 40;
    auto x = gentse::testing::random_wave(rng, 2500);
    for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += 0.4f * std::sin(2.0 * M_PI * 440.0 * i / 16000.0);
    const auto ref = ref_log_mel(x.samples, c);
    const auto got = compute_log_mel(x, c);
    REQUIRE(got.frames() == static_cast<std::int64_t>(ref[0].size()));
    REQUIRE(got.frames() == 16);  // ceil(2500 / 160)
    double err = 0.0;
    for (int b = 0; b < c.n_mels; ++b) {
      for (std::int64_t t = 0; t < got.frames(); ++t) {
        err = std::max(err, std::abs(ref[b][t] - got.values[b][t].item<double>()));
      }
    }
    CHECK(err < 1e-4);
  }

  TEST_CASE("delaying by one hop shifts frames by one") {
    Rng rng(5);
    FeatureConfig c;
    auto x = gentse::testing::random_wave(rng, 4000);
    Waveform y = x;
    y.samples.insert(y.samples.begin(), c.hop_length, 0.0f);
    const auto a = compute_log_mel(x, c).values;
    const auto b = compute_log_mel(y, c).values;
    REQUIRE(b.size(1) == a.size(1) + 1);
    CHECK((b.narrow(1, 1, a.size(1)) - a).abs().max().item<double>() < 1e-4);
  }

  TEST_CASE("frame count is ceil(n / hop)") {
    FeatureConfig c;
    for (std::size_t n : {1u, 159u, 160u, 161u, 16000u}) {
      CHECK(c.frames_for(n) == static_cast<std::int64_t>((n + 159) / 160));
      CHECK(compute_log_mel(Waveform(std::vector<float>(n, 0.1f), 16000), c).frames() == c.frames_for(n));
    }
  }

  TEST_CASE("log floor and base") {
    FeatureConfig c;
    auto silent = compute_log_mel(Waveform(std::vector<float>(800, 0.0f), 16000), c);
    CHECK(silent.values.max().item<double>() == doctest::Approx(std::log(1e-10)).epsilon(1e-6));
    c.log_base = LogBase::kTen;
    auto t = compute_log_mel(Waveform(std::vector<float>(800, 0.0f), 16000), c);
    CHECK(t.values.max().item<double>() == doctest::Approx(-10.0).epsilon(1e-6));
  }

  TEST_CASE("input validation") {
    FeatureConfig c;
    CHECK(code_of([&] { compute_log_mel(Waveform({}, 16000), c); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { compute_log_mel(Waveform({0.1f, NAN}, 16000), c); }) == ErrorCode::kInvalidInput);
    CHECK(code_of([&] { compute_log_mel(Waveform({0.1f}, 8000), c); }) == ErrorCode::kInvalidInput);
    c.win_length = 500;
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  }

  TEST_CASE("stft / istft round trip") {
    Rng rng(8);
    FeatureConfig c;
    auto x = gentse::testing::random_wave(rng, 3200);
    auto y = istft(stft(x.samples, c), c);
    REQUIRE(y.size() == 3200u);
    double err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(double(y[i]) - x.samples[i]));
    CHECK(err < 1e-5);
  }

  TEST_CASE("griffin-lim output length and spectral fidelity") {
    FeatureConfig c;
    c.n_mels = 40;
    auto x = gentse::testing::tone(300.0, 8000);
    auto mel = compute_log_mel(x, c);
    GriffinLimVocoder voc(c, {});
    auto y = voc.vocode(mel);
    CHECK(y.size() == static_cast<std::size_t>(mel.frames() * c.hop_length));
    CHECK(voc.invert_mel(mel).min().item<double>() >= 0.0);
    auto back = compute_log_mel(y, c).values.narrow(1, 0, mel.frames());
    // Compare loud bins only; floors dominate elsewhere.
    auto mask = mel.values > mel.values.max() - 6.0;
    CHECK((back - mel.values).abs().masked_select(mask).mean().item<double>() < 0.5);
  }
}

TEST_SUITE("audio") {
  TEST_CASE("wav round trips") {
    TempDir dir("wav");
    Rng rng(1);
    auto x = gentse::testing::random_wave(rng, 1000, 0.9);
    write_wav(dir / "f.wav", x, WavEncoding::kFloat32);
    CHECK(read_wav(dir / "f.wav") == x);
    write_wav(dir / "p.wav", x, WavEncoding::kPcm16);
    auto y = read_wav(dir / "p.wav");
    REQUIRE(y.size() == x.size());
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(double(y.samples[i]) - x.samples[i]));
    CHECK(err <= 1.0 / 32767.0);
  }

  TEST_CASE("wav errors") {
    TempDir dir("wavbad");
    CHECK(code_of([&] { read_wav(dir / "missing.wav"); }) == ErrorCode::kMissingFile);
    write_raw_wav(dir / "stereo.wav", 1, 2, 16, std::vector<char>(400, 0));
    CHECK(code_of([&] { read_wav(dir / "stereo.wav"); }) == ErrorCode::kMultichannel);
    write_raw_wav(dir / "adpcm.wav", 2, 1, 4, std::vector<char>(400, 0));
    CHECK(code_of([&] { read_wav(dir / "adpcm.wav"); }) == ErrorCode::kUnsupportedEncoding);
    write_raw_wav(dir / "pcm24.wav", 1, 1, 24, std::vector<char>(300, 0));
    CHECK(code_of([&] { read_wav(dir / "pcm24.wav"); }) == ErrorCode::kUnsupportedEncoding);
    write_raw_wav(dir / "short.wav", 1, 1, 16, std::vector<char>(100, 0), 4000);
    CHECK(code_of([&] { read_wav(dir / "short.wav"); }) == ErrorCode::kParse);
    write_raw_wav(dir / "empty.wav", 1, 1, 16, {});
    CHECK(code_of([&] { read_wav(dir / "empty.wav"); }) == ErrorCode::kParse);
    {
      std::ofstream f(dir / "junk.wav", std::ios::binary);
      f << "definitely not a wav file";
    }
    CHECK(code_of([&] { read_wav(dir / "junk.wav"); }) == ErrorCode::kParse);
  }

  TEST_CASE("integer resampling keeps a tone") {
    auto hi = gentse::testing::tone(440.0, 48000, 0.5, 48000);
    auto lo = resample_integer(hi, 16000);
    CHECK(lo.sample_rate == 16000);
    REQUIRE(lo.size() == 16000u);
    auto ref = gentse::testing::tone(440.0, 16000);
    double err = 0.0;
    for (std::size_t i = 200; i < 15800; ++i) err = std::max(err, std::abs(double(lo.samples[i]) - ref.samples[i]));
    CHECK(err < 1e-2);
    CHECK(code_of([&] { resample_integer(gentse::testing::tone(440.0, 441, 0.5, 44100), 16000); }) ==
          ErrorCode::kInvalidInput);
  }
}
