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

#include "gentse/plot.h"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {
namespace {

constexpr int kGutter = 6;
// Dynamic range shown below the panel maximum, in log-energy units.
constexpr double kRange = 16.0;

// Dark blue -> purple -> orange -> pale yellow.
std::array<unsigned char, 3> colour(double u) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {0.0, 0.0, 0.02},
      {0.23, 0.06, 0.44},
      {0.72, 0.21, 0.47},
      {0.99, 0.55, 0.24},
      {0.99, 0.99, 0.75},
  }};
  u = std::clamp(u, 0.0, 1.0) * (stops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(u), stops.size() - 2);
  const double f = u - static_cast<double>(i);
  std::array<unsigned char, 3> c{};
  for (int k = 0; k < 3; ++k) {
    c[k] = static_cast<unsigned char>(std::lround(255.0 * (stops[i][k] * (1.0 - f) + stops[i + 1][k] * f)));
  }
  return c;
}

void check_panel(const torch::Tensor& t, const std::string& id, const char* what) {
  require(t.defined() && t.dim() == 2 && t.size(0) >= 1 && t.size(1) >= 1, ErrorCode::kInvalidInput,
          id + ": " + what + " must be a non-empty [n_mels, T] matrix");
}

}  // namespace

Image render_panel(const SpectrogramPanel& panel, int scale) {
  check_panel(panel.mixture, panel.id, "mixture");
  check_panel(panel.prediction, panel.id, "prediction");
  check_panel(panel.reference, panel.id, "reference");
  const std::array<torch::Tensor, 3> mats{panel.mixture.to(torch::kFloat64).contiguous(),
                                          panel.prediction.to(torch::kFloat64).contiguous(),
                                          panel.reference.to(torch::kFloat64).contiguous()};
  const auto bands = mats[0].size(0);
  require(mats[1].size(0) == bands && mats[2].size(0) == bands, ErrorCode::kInvalidInput,
          panel.id + ": panels differ in mel bands");
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& m : mats) hi = std::max(hi, m.max().item<double>());
  const double lo = hi - kRange;

  Image img;
  img.height = static_cast<int>(bands) * scale;
  for (const auto& m : mats) img.width += static_cast<int>(m.size(1)) * scale;
  img.width += 2 * kGutter;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);

  int x0 = 0;
  for (const auto& m : mats) {
    const auto frames = m.size(1);
    auto a = m.accessor<double, 2>();
    for (int y = 0; y < img.height; ++y) {
      const auto band = bands - 1 - y / scale;
      for (int x = 0; x < frames * scale; ++x) {
        const auto c = colour((a[band][x / scale] - lo) / kRange);
        auto* px = &img.rgb[(static_cast<std::size_t>(y) * img.width + x0 + x) * 3];
        px[0] = c[0];
        px[1] = c[1];
        px[2] = c[2];
      }
    }
    x0 += static_cast<int>(frames) * scale + kGutter;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  require(fp != nullptr, ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::kIo, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&image.rgb[static_cast<std::size_t>(y) * image.width * 3]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  require(std::fclose(fp) == 0, ErrorCode::kIo, "cannot finish writing " + path.string());
}

std::vector<std::filesystem::path> plot_spectrograms(const std::vector<SpectrogramPanel>& panels,
                                                     const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (panels.empty()) return out;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& p : panels) {
    auto path = dir / (p.id + ".png");
    write_png(path, render_panel(p));
    out.push_back(path);
  }
  return out;
}

}  // namespace gentse
