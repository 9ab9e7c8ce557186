// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Density-peak splitting of make/model labels into sub-classes.
//
// Within one (make, model) group the extraction repeats, on the set U of
// not yet assigned records:
//   density(i) = |{ j in U : score(i, j) >= threshold }|   (i counts itself)
//   peak       = argmax density, ties to the lowest input index
//   cluster    = the peak's threshold ball inside U, removed from U
// until U is empty. Clusters smaller than the minimum size are discarded.
// Membership is the peak's ball only, never its transitive closure.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "reident/embedding.hpp"

namespace reident {

struct ClusterParams {
  double simThreshold = 0.75;
  std::size_t minClusterSize = 20;

  void validate() const;
};

/// Refined label of one record. `clusterIndex` is empty for DISCARDED records.
struct ClusterAssignment {
  std::string recordId;
  std::string make;
  std::string model;
  std::optional<std::size_t> clusterIndex;

  bool discarded() const { return !clusterIndex.has_value(); }
  bool operator==(const ClusterAssignment&) const = default;
};

/// One extraction step, in extraction order.
struct ExtractedCluster {
  std::size_t peak = 0;                    // index into the group's records
  std::vector<std::size_t> members;        // ascending group indices, includes peak
  std::optional<std::size_t> clusterIndex; // empty when discarded

  bool operator==(const ExtractedCluster&) const = default;
};

struct GroupClustering {
  std::string make;
  std::string model;
  std::size_t recordCount = 0;
  std::vector<ExtractedCluster> clusters;

  std::size_t acceptedClusters() const;
  std::size_t discardedRecords() const;
  bool operator==(const GroupClustering&) const = default;
};

struct ClusteringResult {
  /// Ordered by (make, model), then extraction order, members ascending.
  std::vector<ClusterAssignment> assignments;
  std::size_t clusterCount = 0;      // accepted clusters
  std::size_t discardedCount = 0;    // discarded records
  std::size_t classCountBefore = 0;  // distinct (make, model)
  std::size_t classCountAfter = 0;   // accepted (make, model, cluster) triples
  std::vector<GroupClustering> groups;

  const ClusterAssignment* find(std::string_view recordId) const;
  nlohmann::ordered_json reportJson() const;
  bool operator==(const ClusteringResult&) const = default;
};

/// Row-major symmetric n x n matrix of match scores, unit diagonal.
class ScoreMatrix {
 public:
  explicit ScoreMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

ScoreMatrix pairwiseScores(std::span<const EmbeddingRecord> records);

/// Runs the extraction on records that all share one make/model.
ClusteringResult extractDensityClusters(std::span<const EmbeddingRecord> records,
                                        const ClusterParams& params);

/// Partitions by (make, model) and clusters each group. Groups run on up to
/// `threads` workers; the result does not depend on the worker count.
ClusteringResult clusterGallery(const Gallery& gallery, const ClusterParams& params,
                                std::size_t threads = 1);

/// Rewrites model to "model#k" for records of accepted cluster k. Discarded
/// records are dropped or kept with their original label.
Gallery relabelGallery(const Gallery& gallery, const ClusteringResult& result,
                       bool dropDiscarded);

}  // namespace reident
