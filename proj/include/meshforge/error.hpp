// Copyright 2026 The MeshForge Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshforge {

enum class Errc {
  kInvalidArgument,
  kNonPositiveDepth,
  kNoConvergence,
  kInsufficientPoints,
  kDegenerateConfiguration,
  kBehindCamera,
  kReprojectionTooLarge,
  kEmptyUnion,
  kMissingNormals,
  kMissingColors,
  kEmptyInput,
  kDegenerateReconPoint,
  kNonPositiveScale,
  kRayMiss,
  kInsufficientPairs,
  kEmptyCloud,
  kNoCorrespondences,
  kDimensionMismatch,
  kEmptyMask,
  kAllFramesExcluded,
  kParse,
  kIo,
  kConfig,
};

constexpr std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kNonPositiveDepth: return "NonPositiveDepth";
    case Errc::kNoConvergence: return "NoConvergence";
    case Errc::kInsufficientPoints: return "InsufficientPoints";
    case Errc::kDegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::kBehindCamera: return "BehindCamera";
    case Errc::kReprojectionTooLarge: return "ReprojectionTooLarge";
    case Errc::kEmptyUnion: return "EmptyUnion";
    case Errc::kMissingNormals: return "MissingNormals";
    case Errc::kMissingColors: return "MissingColors";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kDegenerateReconPoint: return "DegenerateReconPoint";
    case Errc::kNonPositiveScale: return "NonPositiveScale";
    case Errc::kRayMiss: return "RayMiss";
    case Errc::kInsufficientPairs: return "InsufficientPairs";
    case Errc::kEmptyCloud: return "EmptyCloud";
    case Errc::kNoCorrespondences: return "NoCorrespondences";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptyMask: return "EmptyMask";
    case Errc::kAllFramesExcluded: return "AllFramesExcluded";
    case Errc::kParse: return "ParseError";
    case Errc::kIo: return "IoError";
    case Errc::kConfig: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code, so
/// callers (the CLI, the HTTP service) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace meshforge
