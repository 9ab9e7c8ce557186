// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Precomputed best-shot index over a video gallery and the queries served
// from it. Classification happens once, at build time; queries only filter.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reident/embedding.hpp"
#include "reident/head.hpp"

namespace reident {

struct TrackMember {
  std::string id;
  std::optional<std::uint64_t> frame;
  double quality = 0.0;

  bool operator==(const TrackMember&) const = default;
};

struct IndexEntry {
  std::string trackId;
  std::string recordId;  // best shot
  std::string predictedLabel;
  std::string predictedMake;
  std::string predictedModel;  // base model, cluster suffix removed
  double shapeScore = 0.0;
  std::optional<Color> color;
  std::vector<TrackMember> members;  // ordered by frame

  bool operator==(const IndexEntry&) const = default;
};

struct ReidIndex {
  std::size_t galleryCount = 0;
  std::size_t dimension = 0;
  HeadVariant headVariant = HeadVariant::kPriorFree;
  std::vector<IndexEntry> entries;  // ordered by trackId

  const IndexEntry* find(std::string_view trackId) const;
  nlohmann::ordered_json metaJson() const;
  bool operator==(const ReidIndex&) const = default;
};

ReidIndex buildIndex(const Gallery& gallery, const HeadModel& head);

nlohmann::ordered_json indexToJson(const ReidIndex& index);
ReidIndex indexFromJson(const nlohmann::json& json);

/// Written to a temporary sibling and renamed into place.
void saveIndex(const ReidIndex& index, const std::filesystem::path& path);
ReidIndex loadIndex(const std::filesystem::path& path);

struct SearchQuery {
  std::optional<std::string> make;
  std::optional<std::string> model;
  std::optional<std::string> color;
  std::optional<double> minScore;
  std::size_t limit = 50;
};

struct SearchEntry {
  std::string trackId;
  std::string recordId;
  std::string predictedMake;
  std::string predictedModel;
  double shapeScore = 0.0;
  std::optional<std::string> colorName;
  std::optional<double> colorScore;

  bool operator==(const SearchEntry&) const = default;
};

struct SearchResult {
  std::vector<SearchEntry> entries;

  nlohmann::ordered_json toJson() const;
  bool operator==(const SearchResult&) const = default;
};

/// Make/model match case-insensitively, color exactly; shapeScore must reach
/// the query's minScore (or `defaultMinScore`). Sorted by score descending,
/// ties by trackId, truncated to the limit. Throws BadQuery without any
/// filter field, with limit 0 or a minScore outside [0,1].
SearchResult search(const ReidIndex& index, const SearchQuery& query, double defaultMinScore);

/// Members of a track ordered by frame. Throws UnknownTrack.
const std::vector<TrackMember>& trackDetail(const ReidIndex& index, std::string_view trackId);

}  // namespace reident
