//
// Copyright 2026 The pmwpub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <stdexcept>
#include <string>

namespace pmwpub {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kSchemaMismatch,
  kMalformedCsv,
  kMissingColumn,
  kUnknownCategory,
  kValueOutOfBins,
  kEmptyStratum,
  kBudgetExceeded,
  kInfeasible,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kConfig:
      return "config";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kSchemaMismatch:
      return "schema_mismatch";
    case ErrorCode::kMalformedCsv:
      return "malformed_csv";
    case ErrorCode::kMissingColumn:
      return "missing_column";
    case ErrorCode::kUnknownCategory:
      return "unknown_category";
    case ErrorCode::kValueOutOfBins:
      return "value_out_of_bins";
    case ErrorCode::kEmptyStratum:
      return "empty_stratum";
    case ErrorCode::kBudgetExceeded:
      return "budget_exceeded";
    case ErrorCode::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

// Every failure raised by the library. The code decides the CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Exit status: 1 config error, 2 data error, 3 budget error.
inline int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig:
    case ErrorCode::kInfeasible:
      return 1;
    case ErrorCode::kIo:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kMalformedCsv:
    case ErrorCode::kMissingColumn:
    case ErrorCode::kUnknownCategory:
    case ErrorCode::kValueOutOfBins:
    case ErrorCode::kEmptyStratum:
      return 2;
    case ErrorCode::kBudgetExceeded:
      return 3;
  }
  return 1;
}

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace pmwpub
