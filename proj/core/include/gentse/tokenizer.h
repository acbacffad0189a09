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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gentse {

using TokenId = std::int64_t;

// Decoder input: condition prefix c, transcript body y, end token.
struct TranscriptTokens {
  std::vector<TokenId> condition;
  std::vector<TokenId> body;
  TokenId eot = 4;

  // c ++ y: what the decoder reads.
  std::vector<TokenId> prefix() const;
  // y ++ [eot]: what positions |c|-1 .. end must predict.
  std::vector<TokenId> targets() const;

  friend bool operator==(const TranscriptTokens&, const TranscriptTokens&) = default;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> encode(const std::string& text) const = 0;
  virtual std::string decode(const std::vector<TokenId>& ids) const = 0;
  virtual int vocab_size() const = 0;
  // [SOT, EN, transcribe, no-timestamps]
  virtual std::array<TokenId, 4> condition_ids() const = 0;
  virtual TokenId eot_id() const = 0;

  TranscriptTokens tokens_for(const std::string& text) const;
};

// Character-level tokenizer. Ids 0-3 are the condition tokens, 4 is EOT,
// characters start at 5. Characters outside the table are dropped after
// lowercasing.
class CharTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kSot = 0;
  static constexpr TokenId kEnglish = 1;
  static constexpr TokenId kTranscribe = 2;
  static constexpr TokenId kNoTimestamps = 3;
  static constexpr TokenId kEot = 4;
  static constexpr TokenId kFirstChar = 5;

  explicit CharTokenizer(std::string alphabet = " abcdefghijklmnopqrstuvwxyz'");

  // JSON: {"reserved": {"sot":0,"en":1,"transcribe":2,"no_timestamps":3,"eot":4},
  //        "chars": {"5": " ", "6": "a", ...}}
  static CharTokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<TokenId> encode(const std::string& text) const override;
  std::string decode(const std::vector<TokenId>& ids) const override;
  int vocab_size() const override { return static_cast<int>(kFirstChar + alphabet_.size()); }
  std::array<TokenId, 4> condition_ids() const override {
    return {kSot, kEnglish, kTranscribe, kNoTimestamps};
  }
  TokenId eot_id() const override { return kEot; }
  const std::string& alphabet() const { return alphabet_; }

 private:
  std::string alphabet_;
  std::map<char, TokenId> index_;
};

}  // namespace gentse
