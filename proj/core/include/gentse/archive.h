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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

namespace gentse {

// Directory of named numeric arrays:
//   header.json  {"format": "gentse-arrays", "version": 1,
//                 "tensors": {name: {"shape", "dtype", "offset", "nbytes", "fnv1a64"}}}
//   data.bin     raw little-endian payloads, concatenated in header order.
using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

inline constexpr int kArchiveVersion = 1;

void save_archive(const std::filesystem::path& dir, const NamedTensors& tensors);
// kMissingFile, kVersion, kCorrupt (checksum or size mismatch).
std::map<std::string, torch::Tensor> load_archive(const std::filesystem::path& dir);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(const std::string& s);
// Hash over dtype, shape and bytes.
std::uint64_t tensor_fingerprint(const torch::Tensor& t);
// Order-independent over names; stable across runs.
std::uint64_t tensors_fingerprint(const NamedTensors& tensors);
std::string hex64(std::uint64_t v);

}  // namespace gentse
