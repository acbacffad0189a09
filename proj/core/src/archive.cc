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

#include "gentse/archive.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "gentse/error.h"

namespace gentse {
namespace {

using nlohmann::json;

const char* dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: fail(ErrorCode::kInvalidInput, "unsupported archive dtype");
  }
}

torch::ScalarType dtype_from(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "uint8") return torch::kUInt8;
  fail(ErrorCode::kCorrupt, "unknown dtype " + s);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  auto p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t tensor_fingerprint(const torch::Tensor& t) {
  auto c = t.detach().cpu().contiguous();
  std::string meta = std::string(dtype_name(c.scalar_type())) + ":";
  for (auto d : c.sizes()) meta += std::to_string(d) + ",";
  auto h = fnv1a64(meta);
  return fnv1a64(c.data_ptr(), c.nbytes(), h);
}

std::uint64_t tensors_fingerprint(const NamedTensors& tensors) {
  std::vector<std::pair<std::string, std::uint64_t>> parts;
  for (const auto& [name, t] : tensors) parts.emplace_back(name, tensor_fingerprint(t));
  std::sort(parts.begin(), parts.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, fp] : parts) {
    h = fnv1a64(name.data(), name.size(), h);
    h = fnv1a64(&fp, sizeof fp, h);
  }
  return h;
}

void save_archive(const std::filesystem::path& dir, const NamedTensors& tensors) {
  std::filesystem::create_directories(dir);
  json header{{"format", "gentse-arrays"}, {"version", kArchiveVersion}};
  json entries = json::object();
  std::ofstream data(dir / "data.bin", std::ios::binary | std::ios::trunc);
  if (!data) fail(ErrorCode::kIo, "cannot write " + (dir / "data.bin").string());
  std::uint64_t offset = 0;
  std::vector<std::string> order;
  for (const auto& [name, t] : tensors) {
    require(!entries.contains(name), ErrorCode::kInvalidInput, "duplicate tensor name " + name);
    auto c = t.detach().cpu().contiguous();
    json e;
    e["shape"] = c.sizes().vec();
    e["dtype"] = dtype_name(c.scalar_type());
    e["offset"] = offset;
    e["nbytes"] = c.nbytes();
    e["fnv1a64"] = hex64(fnv1a64(c.data_ptr(), c.nbytes()));
    data.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.nbytes()));
    offset += c.nbytes();
    entries[name] = e;
    order.push_back(name);
  }
  header["tensors"] = entries;
  header["order"] = order;
  if (!data) fail(ErrorCode::kIo, "write failed for " + (dir / "data.bin").string());
  std::ofstream h(dir / "header.json", std::ios::trunc);
  h << header.dump(2) << "\n";
  if (!h) fail(ErrorCode::kIo, "write failed for " + (dir / "header.json").string());
}

std::map<std::string, torch::Tensor> load_archive(const std::filesystem::path& dir) {
  std::ifstream h(dir / "header.json");
  if (!h) fail(ErrorCode::kMissingFile, (dir / "header.json").string());
  json header;
  try {
    h >> header;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorrupt, (dir / "header.json").string() + ": " + e.what());
  }
  if (header.value("format", "") != "gentse-arrays") {
    fail(ErrorCode::kCorrupt, dir.string() + " is not an array archive");
  }
  if (header.value("version", -1) != kArchiveVersion) {
    fail(ErrorCode::kVersion, dir.string() + ": archive version " +
                                  std::to_string(header.value("version", -1)) + ", expected " +
                                  std::to_string(kArchiveVersion));
  }
  std::ifstream data(dir / "data.bin", std::ios::binary);
  if (!data) fail(ErrorCode::kMissingFile, (dir / "data.bin").string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());

  std::map<std::string, torch::Tensor> out;
  for (auto& [name, e] : header.at("tensors").items()) {
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto nbytes = e.at("nbytes").get<std::uint64_t>();
    if (offset + nbytes > bytes.size()) fail(ErrorCode::kCorrupt, name + ": payload truncated");
    if (hex64(fnv1a64(bytes.data() + offset, nbytes)) != e.at("fnv1a64").get<std::string>()) {
      fail(ErrorCode::kCorrupt, name + ": checksum mismatch");
    }
    auto shape = e.at("shape").get<std::vector<std::int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype_from(e.at("dtype"))));
    if (t.nbytes() != nbytes) fail(ErrorCode::kCorrupt, name + ": size does not match shape");
    std::memcpy(t.data_ptr(), bytes.data() + offset, nbytes);
    out.emplace(name, t);
  }
  return out;
}

}  // namespace gentse
