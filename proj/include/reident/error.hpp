// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reident {

enum class ErrorCode {
  kZeroNormVector,
  kDimensionMismatch,
  kParseError,
  kDuplicateId,
  kEmptyGallery,
  kIoError,
  kInvalidArgument,
  kMissingAssignment,
  kSingleClass,
  kEmptyClass,
  kUnknownLabel,
  kNoClientPairs,
  kNoImpostorPairs,
  kEmptyDensity,
  kUnsatisfiable,
  kMissingTrackId,
  kMissingQuality,
  kBadQuery,
  kUnknownTrack,
};

/// Stable name of an error code, e.g. "DuplicateId". Used in reports and HTTP error bodies.
std::string_view errorName(ErrorCode code);

/// Domain error raised by every reident module.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace reident
