// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/error.hpp"

namespace reident {

std::string_view errorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroNormVector: return "ZeroNormVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kEmptyGallery: return "EmptyGallery";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingAssignment: return "MissingAssignment";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kNoClientPairs: return "NoClientPairs";
    case ErrorCode::kNoImpostorPairs: return "NoImpostorPairs";
    case ErrorCode::kEmptyDensity: return "EmptyDensity";
    case ErrorCode::kUnsatisfiable: return "Unsatisfiable";
    case ErrorCode::kMissingTrackId: return "MissingTrackId";
    case ErrorCode::kMissingQuality: return "MissingQuality";
    case ErrorCode::kBadQuery: return "BadQuery";
    case ErrorCode::kUnknownTrack: return "UnknownTrack";
  }
  return "Unknown";
}

}  // namespace reident
