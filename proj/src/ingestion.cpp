// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/ingestion.hpp"

#include <fmt/format.h>

#include <cstring>
#include <map>
#include <string_view>
#include <unordered_set>

namespace reident {

void CleansingReport::append(const CleansingReport& next) {
  exactDuplicatesRemoved += next.exactDuplicatesRemoved;
  nearDuplicatesRemoved += next.nearDuplicatesRemoved;
  lowQualityRemoved += next.lowQualityRemoved;
  outputCount = next.outputCount;
  removedIds.insert(removedIds.end(), next.removedIds.begin(), next.removedIds.end());
}

nlohmann::ordered_json CleansingReport::toJson() const {
  nlohmann::ordered_json removed = nlohmann::ordered_json::array();
  for (const auto& r : removedIds) removed.push_back({{"id", r.id}, {"reason", r.reason}});
  return {{"input_count", inputCount},
          {"exact_duplicates_removed", exactDuplicatesRemoved},
          {"near_duplicates_removed", nearDuplicatesRemoved},
          {"low_quality_removed", lowQualityRemoved},
          {"output_count", outputCount},
          {"removed", std::move(removed)}};
}

namespace {

void checkUnit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("{} must lie in [0,1], got {}", name, v));
  }
}

CleansingResult finish(const Gallery& in, std::vector<EmbeddingRecord> kept,
                       CleansingReport report) {
  report.inputCount = in.size();
  report.outputCount = kept.size();
  return {Gallery(in.dimension(), std::move(kept)), std::move(report)};
}

}  // namespace

CleansingResult dedupExact(const Gallery& gallery) {
  CleansingReport report;
  std::vector<EmbeddingRecord> kept;
  std::unordered_set<std::string_view> seen;
  for (const auto& r : gallery.records()) {
    std::string_view bytes(reinterpret_cast<const char*>(r.vec.data()),
                           r.vec.size() * sizeof(float));
    if (seen.insert(bytes).second) {
      kept.push_back(r);
    } else {
      ++report.exactDuplicatesRemoved;
      report.removedIds.push_back({r.id, kReasonExactDuplicate});
    }
  }
  return finish(gallery, std::move(kept), std::move(report));
}

CleansingResult dedupNear(const Gallery& gallery, double simThreshold) {
  checkUnit(simThreshold, "near-duplicate threshold");
  CleansingReport report;
  std::vector<EmbeddingRecord> kept;
  // Kept vectors and their norms per (make, model).
  struct Kept {
    std::span<const float> vec;
    double norm;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Kept>> byLabel;
  std::vector<std::size_t> keptIndex;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const auto& r = gallery[i];
    const std::span<const float> v(r.vec);
    const double norm = detail::norm64(v);
    if (norm == 0.0) {
      throw Error(ErrorCode::kZeroNormVector,
                  fmt::format("record '{}' has a zero-norm vector", r.id));
    }
    auto& peers = byLabel[{r.make, r.model}];
    bool duplicate = false;
    for (const Kept& k : peers) {
      const double score = detail::scoreFromCosine(
          detail::cosineFromParts(detail::dot64(v, k.vec), norm, k.norm));
      if (score >= simThreshold) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      ++report.nearDuplicatesRemoved;
      report.removedIds.push_back({r.id, kReasonNearDuplicate});
    } else {
      peers.push_back({v, norm});
      keptIndex.push_back(i);
    }
  }
  kept.reserve(keptIndex.size());
  for (std::size_t i : keptIndex) kept.push_back(gallery[i]);
  return finish(gallery, std::move(kept), std::move(report));
}

CleansingResult filterQuality(const Gallery& gallery, double minQuality) {
  checkUnit(minQuality, "minimum quality");
  CleansingReport report;
  std::vector<EmbeddingRecord> kept;
  for (const auto& r : gallery.records()) {
    if (!r.quality || *r.quality >= minQuality) {
      kept.push_back(r);
    } else {
      ++report.lowQualityRemoved;
      report.removedIds.push_back({r.id, kReasonLowQuality});
    }
  }
  return finish(gallery, std::move(kept), std::move(report));
}

CleansingResult cleanseGallery(const Gallery& gallery, const IngestOptions& options) {
  auto [current, report] = dedupExact(gallery);
  if (options.nearThreshold) {
    auto [next, nextReport] = dedupNear(current, *options.nearThreshold);
    current = std::move(next);
    report.append(nextReport);
  }
  auto [filtered, qualityReport] = filterQuality(current, options.minQuality);
  report.append(qualityReport);
  return {std::move(filtered), std::move(report)};
}

}  // namespace reident
