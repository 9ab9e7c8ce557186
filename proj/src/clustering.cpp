// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/clustering.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "reident/labels.hpp"
#include "reident/parallel.hpp"

namespace reident {

void ClusterParams::validate() const {
  if (!(simThreshold >= 0.0 && simThreshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("cluster threshold must lie in [0,1], got {}", simThreshold));
  }
  if (minClusterSize < 1) {
    throw Error(ErrorCode::kInvalidArgument, "minimum cluster size must be at least 1");
  }
}

std::size_t GroupClustering::acceptedClusters() const {
  return static_cast<std::size_t>(std::count_if(
      clusters.begin(), clusters.end(), [](const auto& c) { return c.clusterIndex.has_value(); }));
}

std::size_t GroupClustering::discardedRecords() const {
  std::size_t n = 0;
  for (const auto& c : clusters) {
    if (!c.clusterIndex) n += c.members.size();
  }
  return n;
}

const ClusterAssignment* ClusteringResult::find(std::string_view recordId) const {
  for (const auto& a : assignments) {
    if (a.recordId == recordId) return &a;
  }
  return nullptr;
}

nlohmann::ordered_json ClusteringResult::reportJson() const {
  nlohmann::ordered_json groupsJson = nlohmann::ordered_json::array();
  for (const auto& g : groups) {
    std::vector<std::size_t> sizes, discardedSizes;
    for (const auto& c : g.clusters) {
      (c.clusterIndex ? sizes : discardedSizes).push_back(c.members.size());
    }
    groupsJson.push_back({{"make", g.make},
                          {"model", g.model},
                          {"records", g.recordCount},
                          {"cluster_sizes", sizes},
                          {"discarded_cluster_sizes", discardedSizes},
                          {"discarded_count", g.discardedRecords()}});
  }
  return {{"class_count_before", classCountBefore},
          {"class_count_after", classCountAfter},
          {"cluster_count", clusterCount},
          {"discarded_count", discardedCount},
          {"groups", std::move(groupsJson)}};
}

namespace {

// Norms computed once per record; scores then reuse the exact arithmetic of
// matchScore so thresholds agree bit-for-bit with the plain function.
std::vector<double> recordNorms(std::span<const EmbeddingRecord* const> records) {
  std::vector<double> norms(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    norms[i] = detail::norm64(std::span<const float>(records[i]->vec));
    if (norms[i] == 0.0) {
      throw Error(ErrorCode::kZeroNormVector,
                  fmt::format("record '{}' has a zero-norm vector", records[i]->id));
    }
  }
  return norms;
}

double pairScore(const EmbeddingRecord& a, const EmbeddingRecord& b, double na, double nb) {
  return detail::scoreFromCosine(detail::cosineFromParts(
      detail::dot64(std::span<const float>(a.vec), std::span<const float>(b.vec)), na, nb));
}

// Dense bit matrix: row i holds the threshold neighbourhood of i.
class BitMatrix {
 public:
  explicit BitMatrix(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  void set(std::size_t i, std::size_t j) { row(i)[j / 64] |= std::uint64_t{1} << (j % 64); }
  std::uint64_t* row(std::size_t i) { return bits_.data() + i * words_; }
  const std::uint64_t* row(std::size_t i) const { return bits_.data() + i * words_; }
  std::size_t words() const { return words_; }

 private:
  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

template <typename Fn>
void forEachBit(const std::uint64_t* a, const std::uint64_t* b, std::size_t words, Fn&& fn) {
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t x = a[w] & b[w];
    while (x) {
      const int bit = std::countr_zero(x);
      fn(w * 64 + static_cast<std::size_t>(bit));
      x &= x - 1;
    }
  }
}

GroupClustering extractGroup(std::span<const EmbeddingRecord* const> records,
                             const ClusterParams& params) {
  GroupClustering group;
  group.recordCount = records.size();
  if (records.empty()) return group;
  group.make = records.front()->make;
  group.model = records.front()->model;

  const std::size_t n = records.size();
  const auto norms = recordNorms(records);
  BitMatrix adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    adjacency.set(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pairScore(*records[i], *records[j], norms[i], norms[j]) >= params.simThreshold) {
        adjacency.set(i, j);
        adjacency.set(j, i);
      }
    }
  }

  const std::size_t words = adjacency.words();
  std::vector<std::uint64_t> alive(words, 0);
  for (std::size_t i = 0; i < n; ++i) alive[i / 64] |= std::uint64_t{1} << (i % 64);
  std::vector<std::size_t> density(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t w = 0; w < words; ++w) {
      density[i] += static_cast<std::size_t>(std::popcount(adjacency.row(i)[w]));
    }
  }

  std::size_t remaining = n;
  std::size_t nextIndex = 0;
  while (remaining > 0) {
    std::size_t peak = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!((alive[i / 64] >> (i % 64)) & 1u)) continue;
      if (peak == n || density[i] > density[peak]) peak = i;
    }

    ExtractedCluster cluster;
    cluster.peak = peak;
    forEachBit(adjacency.row(peak), alive.data(), words,
               [&](std::size_t j) { cluster.members.push_back(j); });
    for (std::size_t m : cluster.members) alive[m / 64] &= ~(std::uint64_t{1} << (m % 64));
    // Each removed member no longer counts towards its surviving neighbours.
    for (std::size_t m : cluster.members) {
      forEachBit(adjacency.row(m), alive.data(), words, [&](std::size_t u) { --density[u]; });
    }
    remaining -= cluster.members.size();
    if (cluster.members.size() >= params.minClusterSize) cluster.clusterIndex = nextIndex++;
    group.clusters.push_back(std::move(cluster));
  }
  return group;
}

ClusteringResult assemble(std::vector<GroupClustering> groups,
                          const std::vector<std::vector<const EmbeddingRecord*>>& members) {
  ClusteringResult result;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (group.recordCount > 0) ++result.classCountBefore;
    for (const auto& c : group.clusters) {
      if (c.clusterIndex) {
        ++result.clusterCount;
        ++result.classCountAfter;
      } else {
        result.discardedCount += c.members.size();
      }
      for (std::size_t m : c.members) {
        const EmbeddingRecord& r = *members[g][m];
        result.assignments.push_back({r.id, r.make, r.model, c.clusterIndex});
      }
    }
  }
  result.groups = std::move(groups);
  return result;
}

}  // namespace

ScoreMatrix pairwiseScores(std::span<const EmbeddingRecord> records) {
  std::vector<const EmbeddingRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const auto norms = recordNorms(ptrs);
  ScoreMatrix m(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < records.size(); ++j) {
      m(i, j) = m(j, i) = pairScore(records[i], records[j], norms[i], norms[j]);
    }
  }
  return m;
}

ClusteringResult extractDensityClusters(std::span<const EmbeddingRecord> records,
                                        const ClusterParams& params) {
  params.validate();
  std::vector<const EmbeddingRecord*> ptrs;
  for (const auto& r : records) {
    if (r.make != records.front().make || r.model != records.front().model) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("record '{}' is {}/{}, expected {}/{}", r.id, r.make, r.model,
                              records.front().make, records.front().model));
    }
    ptrs.push_back(&r);
  }
  std::vector<GroupClustering> groups;
  groups.push_back(extractGroup(ptrs, params));
  return assemble(std::move(groups), {ptrs});
}

ClusteringResult clusterGallery(const Gallery& gallery, const ClusterParams& params,
                                std::size_t threads) {
  params.validate();
  std::map<std::pair<std::string, std::string>, std::vector<const EmbeddingRecord*>> byLabel;
  for (const auto& r : gallery.records()) byLabel[{r.make, r.model}].push_back(&r);

  std::vector<std::vector<const EmbeddingRecord*>> members;
  members.reserve(byLabel.size());
  for (auto& [key, recs] : byLabel) members.push_back(std::move(recs));

  std::vector<GroupClustering> groups(members.size());
  parallelTasks(members.size(), threads,
                [&](std::size_t g) { groups[g] = extractGroup(members[g], params); });
  return assemble(std::move(groups), members);
}

Gallery relabelGallery(const Gallery& gallery, const ClusteringResult& result,
                       bool dropDiscarded) {
  std::unordered_map<std::string_view, const ClusterAssignment*> byId;
  for (const auto& a : result.assignments) byId.emplace(a.recordId, &a);
  std::vector<EmbeddingRecord> out;
  out.reserve(gallery.size());
  for (const auto& r : gallery.records()) {
    auto it = byId.find(r.id);
    if (it == byId.end()) {
      throw Error(ErrorCode::kMissingAssignment,
                  fmt::format("record '{}' has no cluster assignment", r.id));
    }
    const ClusterAssignment& a = *it->second;
    if (a.discarded()) {
      if (!dropDiscarded) out.push_back(r);
      continue;
    }
    EmbeddingRecord refined = r;
    refined.model = refinedModelName(r.model, *a.clusterIndex);
    out.push_back(std::move(refined));
  }
  return Gallery(gallery.dimension(), std::move(out));
}

}  // namespace reident
