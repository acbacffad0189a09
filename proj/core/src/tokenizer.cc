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

#include "gentse/tokenizer.h"

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gentse/error.h"

namespace gentse {

std::vector<TokenId> TranscriptTokens::prefix() const {
  std::vector<TokenId> out(condition);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::vector<TokenId> TranscriptTokens::targets() const {
  std::vector<TokenId> out(body);
  out.push_back(eot);
  return out;
}

TranscriptTokens Tokenizer::tokens_for(const std::string& text) const {
  auto c = condition_ids();
  return {{c.begin(), c.end()}, encode(text), eot_id()};
}

CharTokenizer::CharTokenizer(std::string alphabet) : alphabet_(std::move(alphabet)) {
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    auto [it, inserted] = index_.emplace(alphabet_[i], kFirstChar + static_cast<TokenId>(i));
    require(inserted, ErrorCode::kValidation, std::string("duplicate character '") + alphabet_[i] + "'");
  }
}

std::vector<TokenId> CharTokenizer::encode(const std::string& text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (auto it = index_.find(lower); it != index_.end()) ids.push_back(it->second);
  }
  return ids;
}

std::string CharTokenizer::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= kFirstChar && id < vocab_size()) out.push_back(alphabet_[id - kFirstChar]);
  }
  return out;
}

CharTokenizer CharTokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  const auto& r = j.at("reserved");
  require(r.at("sot") == kSot && r.at("en") == kEnglish && r.at("transcribe") == kTranscribe &&
              r.at("no_timestamps") == kNoTimestamps && r.at("eot") == kEot,
          ErrorCode::kValidation, "tokenizer reserved ids must be 0-4");
  std::map<TokenId, std::string> chars;
  for (auto& [k, v] : j.at("chars").items()) chars[std::stoll(k)] = v.get<std::string>();
  std::string alphabet;
  TokenId expect = kFirstChar;
  for (auto& [id, s] : chars) {
    require(id == expect++ && s.size() == 1, ErrorCode::kValidation,
            "tokenizer chars must be single bytes with contiguous ids from 5");
    alphabet.push_back(s[0]);
  }
  return CharTokenizer(alphabet);
}

void CharTokenizer::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["reserved"] = {{"sot", kSot}, {"en", kEnglish}, {"transcribe", kTranscribe},
                   {"no_timestamps", kNoTimestamps}, {"eot", kEot}};
  nlohmann::json chars = nlohmann::json::object();
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    chars[std::to_string(kFirstChar + i)] = std::string(1, alphabet_[i]);
  }
  j["chars"] = chars;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace gentse
