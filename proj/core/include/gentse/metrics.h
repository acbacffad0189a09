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

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <torch/types.h>

namespace gentse {

// WER when the reference is empty and the hypothesis is not.
inline constexpr double kWerUndefined = std::numeric_limits<double>::infinity();

// Text normalisation applied before scoring:
//   ASCII letters      -> lowercase
//   hyphen, underscore -> word break
//   apostrophe         -> kept inside words ("don't")
//   other punctuation  -> removed
//   whitespace runs    -> single word break
std::string normalize_text(std::string_view text);
std::vector<std::string> split_words(std::string_view normalized);

struct EditCounts {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;

  int errors() const { return substitutions + deletions + insertions; }
};

// Levenshtein alignment with unit costs; ties prefer substitution, then
// deletion, then insertion.
EditCounts align_words(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// (S + D + I) / |ref|; 0 for two empty sequences, kWerUndefined for an
// empty reference with a non-empty hypothesis.
double wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
double wer_text(std::string_view hyp, std::string_view ref);

// dot(a, b) / (|a| |b|) in double precision. kUndefined for a zero-norm
// input, kInvalidInput for a dimension mismatch.
double cosine_similarity(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace gentse
