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

#include <torch/types.h>

namespace gentse {

struct SpectrogramPanel {
  std::string id;
  torch::Tensor mixture;     // [n_mels, T] log-mel
  torch::Tensor prediction;  // [n_mels, T']
  torch::Tensor reference;   // [n_mels, T'']
};

// One PNG per entry, <dir>/<id>.png, with mixture | prediction | reference
// side by side on a shared colour scale (low frequencies at the bottom).
// Returns the written paths; an empty list writes nothing. kIo on failure.
std::vector<std::filesystem::path> plot_spectrograms(const std::vector<SpectrogramPanel>& panels,
                                                     const std::filesystem::path& dir);

// RGB8 rows, top row first.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;
};

Image render_panel(const SpectrogramPanel& panel, int scale = 2);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace gentse
