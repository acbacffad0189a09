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

#include "gentse/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'' || c >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || c == '-' || c == '_') {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> split_words(std::string_view normalized) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && normalized[i] == ' ') ++i;
    auto j = i;
    while (j < normalized.size() && normalized[j] != ' ') ++j;
    if (j > i) words.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  return words;
}

EditCounts align_words(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  const auto n = ref.size(), m = hyp.size();
  struct Cell {
    int cost, s, d, i;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<int>(j), 0, 0, static_cast<int>(j)};
  for (std::size_t r = 1; r <= n; ++r) {
    cur[0] = {static_cast<int>(r), 0, static_cast<int>(r), 0};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool match = ref[r - 1] == hyp[j - 1];
      Cell sub = prev[j - 1];
      sub.cost += match ? 0 : 1;
      sub.s += match ? 0 : 1;
      Cell del = prev[j];
      del.cost += 1;
      del.d += 1;
      Cell ins = cur[j - 1];
      ins.cost += 1;
      ins.i += 1;
      Cell best = sub;
      if (del.cost < best.cost) best = del;
      if (ins.cost < best.cost) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const auto& c = prev[m];
  return {c.s, c.d, c.i, static_cast<int>(n)};
}

double wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  if (ref.empty()) return hyp.empty() ? 0.0 : kWerUndefined;
  auto e = align_words(hyp, ref);
  return static_cast<double>(e.errors()) / static_cast<double>(e.ref_length);
}

double wer_text(std::string_view hyp, std::string_view ref) {
  return wer(split_words(normalize_text(hyp)), split_words(normalize_text(ref)));
}

double cosine_similarity(const torch::Tensor& a, const torch::Tensor& b) {
  require(a.numel() == b.numel(), ErrorCode::kInvalidInput,
          "embedding sizes differ: " + std::to_string(a.numel()) + " vs " + std::to_string(b.numel()));
  auto x = a.reshape({-1}).to(torch::kFloat64).contiguous();
  auto y = b.reshape({-1}).to(torch::kFloat64).contiguous();
  const double* px = x.data_ptr<double>();
  const double* py = y.data_ptr<double>();
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    dot += px[i] * py[i];
    nx += px[i] * px[i];
    ny += py[i] * py[i];
  }
  require(nx > 0.0 && ny > 0.0, ErrorCode::kUndefined, "cosine similarity of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

}  // namespace gentse
