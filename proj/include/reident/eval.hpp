// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Score densities, FAR/FRR curves, threshold selection, rank-1 accuracy
// and best-shot selection.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reident/embedding.hpp"
#include "reident/head.hpp"

namespace reident {

inline constexpr std::size_t kDensityBins = 256;
inline constexpr std::size_t kDefaultGridSize = 1001;

/// Client/impostor score histograms over [0,1]. The exact scores are kept
/// (sorted ascending) because FAR/FRR are computed from them, not from bins.
struct ScoreDensities {
  std::vector<double> binEdges;  // kDensityBins + 1 uniform edges
  std::vector<std::uint64_t> clientCounts;
  std::vector<std::uint64_t> impostorCounts;
  std::uint64_t clientTotal = 0;
  std::uint64_t impostorTotal = 0;
  std::vector<double> clientScores;
  std::vector<double> impostorScores;

  static ScoreDensities fromScores(std::vector<double> client, std::vector<double> impostor);
};

/// Histogram bin of a score in [0,1]; 1.0 falls into the last bin.
std::size_t densityBin(double score);

enum class PairingLabel {
  kModel,           // client: same make and base model
  kRefinedCluster,  // client: same refined cluster; same model, other cluster: ignored
};

/// All unordered record pairs, scored with matchScore. Impostors are always
/// pairs of different (make, base model). Rows are split across `threads`
/// workers; the result does not depend on the worker count.
ScoreDensities scoreDensities(const Gallery& gallery, PairingLabel pairing,
                              std::size_t threads = 1);

struct ErrorRates {
  std::vector<double> thresholds;  // ascending
  std::vector<double> far;
  std::vector<double> frr;
  double eer = 0.0;
  double eerThreshold = 0.0;
};

/// FAR(t) = #{impostor >= t} / impostorTotal, FRR(t) = #{client < t} / clientTotal
/// on `gridSize` thresholds uniform on [0,1]. The EER point minimizes
/// |FAR - FRR| (ties to the lower threshold); eer is the mean of both there.
ErrorRates errorRates(const ScoreDensities& densities, std::size_t gridSize = kDefaultGridSize);

/// Same, on an explicit ascending threshold grid.
ErrorRates errorRates(const ScoreDensities& densities, std::vector<double> thresholds);

struct ThresholdPolicy {
  enum class Kind { kEer, kFarAtMost, kFrrAtMost };
  Kind kind = Kind::kEer;
  double bound = 0.0;

  /// "eer", "far:<alpha>" or "frr:<beta>".
  static ThresholdPolicy parse(std::string_view text);
  std::string toString() const;
};

/// eer: the EER threshold; far<=a: smallest t with FAR(t) <= a;
/// frr<=b: largest t with FRR(t) <= b. Unsatisfiable if no grid point fits.
double pickThreshold(const ErrorRates& rates, const ThresholdPolicy& policy);

/// Fraction of client scores strictly below the q-quantile (nearest rank)
/// of the impostor scores.
double clientMassBelowImpostorQuantile(const ScoreDensities& densities, double q = 0.99);

enum class LabelGranularity { kMake, kMakeModel };

struct Rank1Result {
  double accuracy = 0.0;  // NaN when nothing was accepted ("no-accepts")
  double coverage = 0.0;
  std::size_t correct = 0;
  std::size_t accepted = 0;
  std::size_t total = 0;

  bool noAccepts() const { return accepted == 0; }
};

/// True when the predicted class label names the record's make (and base
/// model, at make/model granularity). Cluster suffixes are ignored.
bool labelMatches(std::string_view predictedLabel, const EmbeddingRecord& truth,
                  LabelGranularity granularity);

/// Rank-1 accuracy; with a threshold, records scoring below it are rejected
/// and accuracy is taken over the accepted ones.
Rank1Result rank1Accuracy(const HeadModel& model, const Gallery& gallery,
                          std::optional<double> threshold, LabelGranularity granularity);

/// Rank-1 scores split into correctly (client) and wrongly (impostor)
/// classified records, for choosing a classification threshold.
ScoreDensities rank1ScoreDensities(const HeadModel& model, const Gallery& gallery,
                                   LabelGranularity granularity);

struct TrackBestShot {
  std::string trackId;
  std::string recordId;
  double quality = 0.0;
  std::string predictedLabel;
  double score = 0.0;

  bool operator==(const TrackBestShot&) const = default;
};

/// Per track, the highest-quality record (ties: lowest frame, records
/// without a frame last, then smallest id), classified. Ordered by trackId.
std::vector<TrackBestShot> bestShots(const Gallery& gallery, const HeadModel& model);

/// CSV "threshold,far,frr", one row per threshold.
void emitCurves(const ErrorRates& rates, const std::filesystem::path& path);
/// CSV "bin_lo,bin_hi,client_count,impostor_count", one row per bin.
void emitCurves(const ScoreDensities& densities, const std::filesystem::path& path);

/// Throws std::logic_error when FAR increases or FRR decreases anywhere.
void checkMonotone(const ErrorRates& rates);

}  // namespace reident
