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

#include "gentse/error.h"

namespace gentse {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kUnsupportedEncoding: return "unsupported-encoding";
    case ErrorCode::kMultichannel: return "multichannel";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kValidation: return "validation-error";
    case ErrorCode::kResolution: return "resolution-error";
    case ErrorCode::kCorpus: return "corpus-error";
    case ErrorCode::kCapacity: return "capacity-error";
    case ErrorCode::kMismatch: return "mismatch";
    case ErrorCode::kNumeric: return "numeric-error";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kState: return "state-error";
    case ErrorCode::kVersion: return "version-mismatch";
    case ErrorCode::kCorrupt: return "corrupted-archive";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kPlugin: return "plugin-error";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return 2;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kMissingFile:
    case ErrorCode::kUnsupportedEncoding:
    case ErrorCode::kMultichannel:
    case ErrorCode::kParse:
    case ErrorCode::kValidation:
    case ErrorCode::kResolution:
    case ErrorCode::kCorpus:
    case ErrorCode::kMismatch:
    case ErrorCode::kVersion:
    case ErrorCode::kCorrupt:
      return 3;
    case ErrorCode::kNumeric:
      return 4;
    default:
      return 1;
  }
}

}  // namespace gentse
