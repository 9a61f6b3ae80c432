// Copyright 2026 The gdl Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>

namespace gdl {

enum class ErrorCode {
  kShapeMismatch,
  kDomainError,
  kInvalidHyperparameter,
  kDegenerateBatch,
  kInvalidTarget,
  kDetachedTensor,
  kOverflow,
  kNoHead,
  kMissingGradient,
  kEmptyBatch,
  kNonFiniteLoss,
  kEmptyDataset,
  kUntrainedGenerator,
  kSizeMismatch,
  kMissingClassDir,
  kUndecodableImage,
  kTooSmall,
  kIoError,
  kCorruptArchive,
  kLengthMismatch,
  kInvalidLabel,
  kEmptyMatrix,
  kConfigError,
  kOracleMismatch,
  kMalformedInput,
};

const char* error_code_name(ErrorCode code) noexcept;

// Process exit status for a command that failed with `code`:
// 1 usage/config, 2 data, 3 non-finite loss, 4 corrupt or malformed file,
// 5 oracle mismatch, 6 I/O, 7 any other model or training error.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace gdl
