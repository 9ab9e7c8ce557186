// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "reident/error.hpp"

namespace reident {

struct Color {
  std::string name;
  double score = 0.0;

  bool operator==(const Color&) const = default;
};

/// One detection: labels, optional video metadata and its embedding vector.
struct EmbeddingRecord {
  std::string id;
  std::string make;
  std::string model;
  std::optional<std::string> trackId;
  std::optional<std::uint64_t> frame;
  std::optional<double> quality;
  std::optional<Color> color;
  std::vector<float> vec;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// An ordered, validated set of records sharing one dimension.
///
/// Construction enforces the record invariants: every vector has exactly
/// `dimension` finite entries, ids are unique, quality and color score lie
/// in [0,1]. An empty gallery is representable (cleansing may drop every
/// record); only loading from disk rejects it.
class Gallery {
 public:
  Gallery() = default;
  Gallery(std::size_t dimension, std::vector<EmbeddingRecord> records);

  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Record with the given id, or nullptr.
  const EmbeddingRecord* find(std::string_view id) const;

  bool operator==(const Gallery&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> byId_;
};

namespace detail {

template <typename T>
double dot64(std::span<const T> a, std::span<const T> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

template <typename T>
double norm64(std::span<const T> a) {
  return std::sqrt(dot64(a, a));
}

// Shared by every score path so that precomputed-norm kernels and the
// plain two-vector call produce bit-identical values.
inline double cosineFromParts(double dot, double normA, double normB) {
  const double c = dot / (normA * normB);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

inline double scoreFromCosine(double cosine) { return (cosine + 1.0) / 2.0; }

void checkSameDimension(std::size_t a, std::size_t b);
[[noreturn]] void throwZeroNorm();

}  // namespace detail

/// dot(a,b)/(|a||b|), clamped to [-1,1]. Accumulates in double.
template <typename T>
double cosineSimilarity(std::span<const T> a, std::span<const T> b) {
  detail::checkSameDimension(a.size(), b.size());
  const double na = detail::norm64(a);
  const double nb = detail::norm64(b);
  if (na == 0.0 || nb == 0.0) detail::throwZeroNorm();
  return detail::cosineFromParts(detail::dot64(a, b), na, nb);
}

/// Cosine similarity mapped onto [0,1]; every density and threshold lives on this axis.
template <typename T>
double matchScore(std::span<const T> a, std::span<const T> b) {
  return detail::scoreFromCosine(cosineSimilarity(a, b));
}

inline double cosineSimilarity(const std::vector<float>& a, const std::vector<float>& b) {
  return cosineSimilarity<float>(std::span<const float>(a), std::span<const float>(b));
}
inline double matchScore(const std::vector<float>& a, const std::vector<float>& b) {
  return matchScore<float>(std::span<const float>(a), std::span<const float>(b));
}

enum class GalleryFormat { kJsonl, kBinary };

/// ".egal" and ".bin" select the binary format, anything else JSONL.
GalleryFormat formatFromPath(const std::filesystem::path& path);

Gallery loadGallery(const std::filesystem::path& path, GalleryFormat format);
void saveGallery(const Gallery& gallery, const std::filesystem::path& path, GalleryFormat format);

inline Gallery loadGallery(const std::filesystem::path& path) {
  return loadGallery(path, formatFromPath(path));
}
inline void saveGallery(const Gallery& gallery, const std::filesystem::path& path) {
  saveGallery(gallery, path, formatFromPath(path));
}

}  // namespace reident
