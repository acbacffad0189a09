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

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>
#include <torch/torch.h>

#include "gentse/audio.h"
#include "gentse/error.h"
#include "gentse/rng.h"

namespace gentse::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng r(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("gentse-" + tag + "-" + std::to_string(r.next_u64() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline Waveform random_wave(Rng& rng, std::size_t n, double amp = 0.3, int rate = 16000) {
  std::vector<float> s(n);
  for (auto& x : s) x = static_cast<float>(amp * (2.0 * rng.uniform() - 1.0));
  return {std::move(s), rate};
}

inline Waveform tone(double hz, std::size_t n, double amp = 0.5, int rate = 16000) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * hz * i / rate));
  return {std::move(s), rate};
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a gentse::Error");
}

}  // namespace gentse::testing

// libtorch's logging header defines a glog-style CHECK that shadows doctest's.
#undef CHECK
#define CHECK(...) DOCTEST_CHECK(__VA_ARGS__)
