// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/reid_index.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

#include "binary_io.hpp"
#include "reident/eval.hpp"
#include "reident/labels.hpp"

namespace reident {

namespace {

constexpr int kIndexFormatVersion = 1;

bool frameOrder(const TrackMember& a, const TrackMember& b) {
  if (a.frame != b.frame) {
    if (!a.frame) return false;
    if (!b.frame) return true;
    return *a.frame < *b.frame;
  }
  return a.id < b.id;
}

}  // namespace

const IndexEntry* ReidIndex::find(std::string_view trackId) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), trackId,
                             [](const IndexEntry& e, std::string_view id) { return e.trackId < id; });
  return (it != entries.end() && it->trackId == trackId) ? &*it : nullptr;
}

nlohmann::ordered_json ReidIndex::metaJson() const {
  return {{"galleryCount", galleryCount},
          {"trackCount", entries.size()},
          {"headVariant", variantName(headVariant)},
          {"dimension", dimension}};
}

ReidIndex buildIndex(const Gallery& gallery, const HeadModel& head) {
  detail::checkSameDimension(gallery.dimension(), head.dimension);
  const auto shots = bestShots(gallery, head);
  std::map<std::string, std::vector<TrackMember>> members;
  for (const auto& r : gallery.records()) {
    members[*r.trackId].push_back({r.id, r.frame, *r.quality});
  }
  ReidIndex index;
  index.galleryCount = gallery.size();
  index.dimension = gallery.dimension();
  index.headVariant = head.variant;
  for (const auto& shot : shots) {
    IndexEntry e;
    e.trackId = shot.trackId;
    e.recordId = shot.recordId;
    e.predictedLabel = shot.predictedLabel;
    const auto label = parseClassLabel(shot.predictedLabel);
    e.predictedMake = label.make;
    e.predictedModel = label.modelName.base;
    e.shapeScore = shot.score;
    e.color = gallery.find(shot.recordId)->color;
    e.members = std::move(members[shot.trackId]);
    std::sort(e.members.begin(), e.members.end(), frameOrder);
    index.entries.push_back(std::move(e));
  }
  return index;
}

nlohmann::ordered_json indexToJson(const ReidIndex& index) {
  nlohmann::ordered_json tracks = nlohmann::ordered_json::array();
  for (const auto& e : index.entries) {
    nlohmann::ordered_json members = nlohmann::ordered_json::array();
    for (const auto& m : e.members) {
      nlohmann::ordered_json mj{{"id", m.id}};
      if (m.frame) mj["frame"] = *m.frame;
      mj["quality"] = m.quality;
      members.push_back(std::move(mj));
    }
    nlohmann::ordered_json ej{{"track_id", e.trackId},
                              {"record_id", e.recordId},
                              {"predicted_label", e.predictedLabel},
                              {"predicted_make", e.predictedMake},
                              {"predicted_model", e.predictedModel},
                              {"shape_score", e.shapeScore}};
    if (e.color) ej["color"] = {{"name", e.color->name}, {"score", e.color->score}};
    ej["members"] = std::move(members);
    tracks.push_back(std::move(ej));
  }
  return {{"format", "reident-index"},
          {"version", kIndexFormatVersion},
          {"gallery_count", index.galleryCount},
          {"dimension", index.dimension},
          {"head_variant", variantName(index.headVariant)},
          {"tracks", std::move(tracks)}};
}

ReidIndex indexFromJson(const nlohmann::json& j) {
  try {
    if (j.at("format") != "reident-index" || j.at("version") != kIndexFormatVersion) {
      throw Error(ErrorCode::kParseError, "not a reident index (format/version mismatch)");
    }
    ReidIndex index;
    index.galleryCount = j.at("gallery_count").get<std::size_t>();
    index.dimension = j.at("dimension").get<std::size_t>();
    index.headVariant = parseVariant(j.at("head_variant").get<std::string>());
    for (const auto& t : j.at("tracks")) {
      IndexEntry e;
      e.trackId = t.at("track_id").get<std::string>();
      e.recordId = t.at("record_id").get<std::string>();
      e.predictedLabel = t.at("predicted_label").get<std::string>();
      e.predictedMake = t.at("predicted_make").get<std::string>();
      e.predictedModel = t.at("predicted_model").get<std::string>();
      e.shapeScore = t.at("shape_score").get<double>();
      if (auto c = t.find("color"); c != t.end()) {
        e.color = Color{c->at("name").get<std::string>(), c->at("score").get<double>()};
      }
      for (const auto& m : t.at("members")) {
        TrackMember tm;
        tm.id = m.at("id").get<std::string>();
        if (auto f = m.find("frame"); f != m.end()) tm.frame = f->get<std::uint64_t>();
        tm.quality = m.at("quality").get<double>();
        e.members.push_back(std::move(tm));
      }
      index.entries.push_back(std::move(e));
    }
    const bool sorted = std::is_sorted(
        index.entries.begin(), index.entries.end(),
        [](const IndexEntry& a, const IndexEntry& b) { return a.trackId < b.trackId; });
    if (!sorted) throw Error(ErrorCode::kParseError, "index tracks are not ordered by track id");
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, fmt::format("malformed index: {}", e.what()));
  }
}

void saveIndex(const ReidIndex& index, const std::filesystem::path& path) {
  io::writeFile(path, indexToJson(index).dump(1) + "\n");
}

ReidIndex loadIndex(const std::filesystem::path& path) {
  const auto text = io::readFile(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, fmt::format("'{}': {}", path.string(), e.what()));
  }
  return indexFromJson(j);
}

nlohmann::ordered_json SearchResult::toJson() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json ej{{"trackId", e.trackId},
                              {"recordId", e.recordId},
                              {"predictedMake", e.predictedMake},
                              {"predictedModel", e.predictedModel},
                              {"shapeScore", e.shapeScore}};
    if (e.colorName) ej["colorName"] = *e.colorName;
    if (e.colorScore) ej["colorScore"] = *e.colorScore;
    arr.push_back(std::move(ej));
  }
  return {{"entries", std::move(arr)}};
}

SearchResult search(const ReidIndex& index, const SearchQuery& query, double defaultMinScore) {
  if (!query.make && !query.model && !query.color) {
    throw Error(ErrorCode::kBadQuery, "query needs at least one of make, model, color");
  }
  if (query.limit == 0) throw Error(ErrorCode::kBadQuery, "limit must be positive");
  const double minScore = query.minScore.value_or(defaultMinScore);
  if (!(minScore >= 0.0 && minScore <= 1.0)) {
    throw Error(ErrorCode::kBadQuery, fmt::format("min_score {} outside [0,1]", minScore));
  }

  std::vector<const IndexEntry*> hits;
  for (const auto& e : index.entries) {
    if (query.make && !equalsIgnoreCase(e.predictedMake, *query.make)) continue;
    if (query.model && !equalsIgnoreCase(e.predictedModel, *query.model)) continue;
    if (query.color && (!e.color || e.color->name != *query.color)) continue;
    if (e.shapeScore < minScore) continue;
    hits.push_back(&e);
  }
  std::sort(hits.begin(), hits.end(), [](const IndexEntry* a, const IndexEntry* b) {
    if (a->shapeScore != b->shapeScore) return a->shapeScore > b->shapeScore;
    return a->trackId < b->trackId;
  });
  if (hits.size() > query.limit) hits.resize(query.limit);

  SearchResult result;
  for (const IndexEntry* e : hits) {
    SearchEntry s{e->trackId, e->recordId, e->predictedMake, e->predictedModel, e->shapeScore,
                  std::nullopt, std::nullopt};
    if (e->color) {
      s.colorName = e->color->name;
      s.colorScore = e->color->score;
    }
    result.entries.push_back(std::move(s));
  }
  return result;
}

const std::vector<TrackMember>& trackDetail(const ReidIndex& index, std::string_view trackId) {
  const IndexEntry* e = index.find(trackId);
  if (!e) throw Error(ErrorCode::kUnknownTrack, fmt::format("unknown track '{}'", trackId));
  return e->members;
}

}  // namespace reident
