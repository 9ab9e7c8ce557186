// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/embedding.hpp"

#include <fmt/format.h>

namespace reident {

namespace detail {

void checkSameDimension(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("vector dimensions differ: {} vs {}", a, b));
  }
}

void throwZeroNorm() {
  throw Error(ErrorCode::kZeroNormVector, "similarity of a zero-norm vector is undefined");
}

}  // namespace detail

namespace {

bool inUnitInterval(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

Gallery::Gallery(std::size_t dimension, std::vector<EmbeddingRecord> records)
    : dimension_(dimension), records_(std::move(records)) {
  if (dimension_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "gallery dimension must be positive");
  }
  byId_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const EmbeddingRecord& r = records_[i];
    if (r.vec.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("record '{}' has dimension {}, gallery dimension is {}", r.id,
                              r.vec.size(), dimension_));
    }
    for (float v : r.vec) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("record '{}' has a non-finite vector entry", r.id));
      }
    }
    if (r.quality && !inUnitInterval(*r.quality)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("record '{}' quality {} outside [0,1]", r.id, *r.quality));
    }
    if (r.color && !inUnitInterval(r.color->score)) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("record '{}' color score {} outside [0,1]", r.id, r.color->score));
    }
    if (!byId_.emplace(r.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, fmt::format("duplicate record id '{}'", r.id));
    }
  }
}

const EmbeddingRecord* Gallery::find(std::string_view id) const {
  auto it = byId_.find(std::string(id));
  return it == byId_.end() ? nullptr : &records_[it->second];
}

GalleryFormat formatFromPath(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".egal" || ext == ".bin") ? GalleryFormat::kBinary : GalleryFormat::kJsonl;
}

}  // namespace reident
