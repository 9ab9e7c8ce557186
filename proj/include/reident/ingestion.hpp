// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "reident/embedding.hpp"

namespace reident {

inline constexpr const char* kReasonExactDuplicate = "exact-duplicate";
inline constexpr const char* kReasonNearDuplicate = "near-duplicate";
inline constexpr const char* kReasonLowQuality = "low-quality";

struct RemovedRecord {
  std::string id;
  std::string reason;

  bool operator==(const RemovedRecord&) const = default;
};

/// Bookkeeping for one or more cleansing passes.
/// Invariant: outputCount == inputCount - (sum of the three removal counters).
struct CleansingReport {
  std::size_t inputCount = 0;
  std::size_t exactDuplicatesRemoved = 0;
  std::size_t nearDuplicatesRemoved = 0;
  std::size_t lowQualityRemoved = 0;
  std::size_t outputCount = 0;
  std::vector<RemovedRecord> removedIds;

  /// Chains a later pass onto this one (its input must be our output).
  void append(const CleansingReport& next);

  nlohmann::ordered_json toJson() const;
};

using CleansingResult = std::pair<Gallery, CleansingReport>;

inline constexpr double kDefaultNearDuplicateThreshold = 0.995;

/// Keeps the first record of every group of bitwise-identical vectors.
CleansingResult dedupExact(const Gallery& gallery);

/// Greedy file-order scan: a record is dropped when its match score to an
/// already kept record with the same make and model reaches `simThreshold`.
CleansingResult dedupNear(const Gallery& gallery,
                          double simThreshold = kDefaultNearDuplicateThreshold);

/// Drops records whose quality is below `minQuality`. Records without a
/// quality value are kept.
CleansingResult filterQuality(const Gallery& gallery, double minQuality);

struct IngestOptions {
  std::optional<double> nearThreshold;
  double minQuality = 0.0;
};

/// exact dedup, then near dedup (when requested), then quality filtering.
CleansingResult cleanseGallery(const Gallery& gallery, const IngestOptions& options);

}  // namespace reident
