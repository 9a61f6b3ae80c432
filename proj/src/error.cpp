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

#include "gdl/error.hpp"

namespace gdl {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kInvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kInvalidTarget: return "InvalidTarget";
    case ErrorCode::kDetachedTensor: return "DetachedTensor";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kNoHead: return "NoHead";
    case ErrorCode::kMissingGradient: return "MissingGradient";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUntrainedGenerator: return "UntrainedGenerator";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kMissingClassDir: return "MissingClassDir";
    case ErrorCode::kUndecodableImage: return "UndecodableImage";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kCorruptArchive: return "CorruptArchive";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kOracleMismatch: return "OracleMismatch";
    case ErrorCode::kMalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidHyperparameter:
      return 1;
    case ErrorCode::kMissingClassDir:
    case ErrorCode::kEmptyDataset:
    case ErrorCode::kUndecodableImage:
    case ErrorCode::kTooSmall:
    case ErrorCode::kInvalidLabel:
      return 2;
    case ErrorCode::kNonFiniteLoss:
      return 3;
    case ErrorCode::kCorruptArchive:
    case ErrorCode::kMalformedInput:
      return 4;
    case ErrorCode::kOracleMismatch:
      return 5;
    case ErrorCode::kIoError:
      return 6;
    default:
      return 7;
  }
}

}  // namespace gdl
