// include/svseval/error.hpp

// Copyright 2026 The svseval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace svseval {

enum class ErrorCode {
  kUnsupportedEncoding,
  kCorruptHeader,
  kEmptyFile,
  kIoError,
  kLengthMismatch,
  kRateMismatch,
  kEmptyBuffer,
  kBufferTooShort,
  kNoQualifyingExcerpt,
  kInvalidConfig,
  kTooShort,
  kAllBlocksGated,
  kZeroReference,
  kSingularSystem,
  kGeometryMismatch,
  kZeroTarget,
  kBadMagic,
  kDimensionOverflow,
  kTruncatedPayload,
  kTooFewFrames,
  kNonFiniteInput,
  kEncoderMismatch,
  kDimensionMismatch,
  kNotEnoughGoldCandidates,
  kUnratedStimulus,
  kEmptyInput,
  kNonFiniteValue,
  kTooFewPoints,
  kMissingSubset,
  kParseError,
};

inline std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kCorruptHeader: return "CorruptHeader";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kEmptyBuffer: return "EmptyBuffer";
    case ErrorCode::kBufferTooShort: return "BufferTooShort";
    case ErrorCode::kNoQualifyingExcerpt: return "NoQualifyingExcerpt";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kAllBlocksGated: return "AllBlocksGated";
    case ErrorCode::kZeroReference: return "ZeroReference";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kGeometryMismatch: return "GeometryMismatch";
    case ErrorCode::kZeroTarget: return "ZeroTarget";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kDimensionOverflow: return "DimensionOverflow";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kEncoderMismatch: return "EncoderMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotEnoughGoldCandidates: return "NotEnoughGoldCandidates";
    case ErrorCode::kUnratedStimulus: return "UnratedStimulus";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kMissingSubset: return "MissingSubset";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the HTTP layer) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(ErrorName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string &message) {
  throw Error(code, message);
}

// Warnings go to stderr unless silenced; tests flip this off.
inline bool &WarningsEnabled() {
  static bool enabled = true;
  return enabled;
}

inline void Warn(std::string_view message) {
  static std::mutex mu;
  if (!WarningsEnabled()) return;
  std::lock_guard<std::mutex> lock(mu);
  std::clog << "WARNING (svseval): " << message << '\n';
}

}  // namespace svseval
