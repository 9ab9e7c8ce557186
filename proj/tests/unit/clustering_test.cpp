// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "reident/clustering.hpp"
#include "reident/error.hpp"
#include "reident/synthetic.hpp"
#include "test_util.hpp"

using namespace reident;
using reident::testing::gallery;
using reident::testing::rec;

namespace {

std::vector<EmbeddingRecord> copies(const std::string& prefix, std::vector<float> v, int n,
                                    const std::string& model = "Golf") {
  std::vector<EmbeddingRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(rec(prefix + std::to_string(i), v, "VW", model));
  return out;
}

std::vector<EmbeddingRecord> operator+(std::vector<EmbeddingRecord> a,
                                       const std::vector<EmbeddingRecord>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<EmbeddingRecord> randomRecords(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    out.push_back(rec("r" + std::to_string(i), v));
  }
  return out;
}

}  // namespace

TEST_CASE("cluster parameters are validated") {
  CHECK_THROWS_AS((ClusterParams{0.5, 0}.validate()), Error);
  CHECK_THROWS_AS((ClusterParams{1.5, 1}.validate()), Error);
  CHECK_NOTHROW((ClusterParams{0.0, 1}.validate()));
}

TEST_CASE("pairwise scores") {
  const auto one = gallery({rec("a", {1, 2})});
  CHECK(pairwiseScores(one.records())(0, 0) == 1.0);
  const auto ortho = gallery({rec("a", {1, 0}), rec("b", {0, 1})});
  const auto m = pairwiseScores(ortho.records());
  CHECK(m(0, 1) == 0.5);
  CHECK(m(1, 0) == 0.5);
  const auto same = gallery(copies("c", {0.3f, 0.7f}, 3));
  const auto s = pairwiseScores(same.records());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(s(i, j) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("density cluster examples") {
  const auto tight = gallery(copies("a", {1, 0}, 25));
  auto r = clusterGallery(tight, {0.9, 20});
  CHECK(r.clusterCount == 1);
  CHECK(r.discardedCount == 0);
  CHECK(r.groups[0].clusters[0].members.size() == 25);

  const auto two = gallery(copies("a", {1, 0}, 25) + copies("b", {0, 1}, 25));
  r = clusterGallery(two, {0.9, 20});
  CHECK(r.clusterCount == 2);
  CHECK(r.groups[0].clusters[0].peak == 0);
  CHECK(r.groups[0].clusters[1].peak == 25);

  const auto outliers = gallery(copies("a", {1, 0, 0}, 25) + copies("o", {0, 1, 0}, 3) +
                                copies("p", {0, 0, 1}, 2));
  r = clusterGallery(outliers, {0.9, 20});
  CHECK(r.clusterCount == 1);
  CHECK(r.discardedCount == 5);
  std::size_t discarded = 0;
  for (const auto& a : r.assignments) discarded += a.discarded() ? 1 : 0;
  CHECK(discarded == 5);
  CHECK(r.find("o0")->discarded());
  CHECK(r.find("a3")->clusterIndex == 0u);
}

TEST_CASE("density peak ties break to the lowest index") {
  const auto g = gallery({rec("a", {1, 0}), rec("b", {0, 1}), rec("c", {0, 1}), rec("d", {1, 0})});
  const auto r = extractDensityClusters(g.records(), {0.9, 1});
  REQUIRE(r.groups[0].clusters.size() == 2);
  CHECK(r.groups[0].clusters[0].peak == 0);
  CHECK(r.groups[0].clusters[0].members == std::vector<std::size_t>{0, 3});
  CHECK(r.groups[0].clusters[1].peak == 1);
}

TEST_CASE("cluster membership is the peak ball, not its closure") {
  // A chain at 0, 0.3, 0.6, 0.9 rad: neighbours are within threshold, ends are not.
  auto at = [](double a) { return std::vector<float>{float(std::cos(a)), float(std::sin(a))}; };
  const auto g = gallery({rec("a", at(0.0)), rec("b", at(0.3)), rec("c", at(0.6)), rec("d", at(0.9))});
  const double t = matchScore(at(0.0), at(0.35));
  const auto r = extractDensityClusters(g.records(), {t, 1});
  REQUIRE(r.groups[0].clusters.size() == 2);
  CHECK(r.groups[0].clusters[0].peak == 1);
  CHECK(r.groups[0].clusters[0].members == std::vector<std::size_t>{0, 1, 2});
  CHECK(r.groups[0].clusters[1].members == std::vector<std::size_t>{3});
  const auto sparse = extractDensityClusters(g.records(), {matchScore(at(0.0), at(0.25)), 1});
  CHECK(sparse.groups[0].clusters.size() == 4);
}

TEST_CASE("extract density clusters rejects mixed labels") {
  const auto g = gallery({rec("a", {1, 0}, "VW", "Golf"), rec("b", {1, 0}, "VW", "Polo")});
  CHECK_THROWS_AS(extractDensityClusters(g.records(), {0.9, 1}), Error);
}

TEST_CASE("density clusters match the exhaustive oracle") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto records = randomRecords(rng, 12, 2 + trial % 3);
    const double t = 0.55 + 0.4 * (trial % 10) / 10.0;
    const std::size_t minSize = 1 + trial % 3;
    const auto r = extractDensityClusters(records, {t, minSize});
    CHECK(r.groups[0].clusters == oracle::densityClusters(records, t, minSize));
  }
}

TEST_CASE("clustering structural invariants") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    auto records = randomRecords(rng, 40, 3);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].model = i % 2 ? "Golf" : "Polo";
    const auto g = gallery(records);
    const ClusterParams params{0.8, 3};
    const auto r = clusterGallery(g, params);
    CHECK(r.assignments.size() == g.size());
    std::set<std::string> seen;
    for (const auto& a : r.assignments) CHECK(seen.insert(a.recordId).second);

    for (const auto& group : r.groups) {
      std::vector<const EmbeddingRecord*> members;
      for (const auto& rec : g.records()) {
        if (rec.model == group.model) members.push_back(&rec);
      }
      std::vector<int> cover(members.size(), 0);
      std::size_t expectedIndex = 0;
      std::vector<bool> taken(members.size(), false);
      for (const auto& c : group.clusters) {
        // Peak property: no remaining element had a strictly larger density.
        auto density = [&](std::size_t i) {
          std::size_t d = 0;
          for (std::size_t j = 0; j < members.size(); ++j) {
            if (!taken[j] && matchScore(members[i]->vec, members[j]->vec) >= params.simThreshold) ++d;
          }
          return d;
        };
        const std::size_t peakDensity = density(c.peak);
        for (std::size_t i = 0; i < members.size(); ++i) {
          if (!taken[i]) CHECK(density(i) <= peakDensity);
        }
        for (std::size_t m : c.members) {
          ++cover[m];
          taken[m] = true;
          CHECK(matchScore(members[c.peak]->vec, members[m]->vec) >= params.simThreshold);
        }
        if (c.clusterIndex) {
          CHECK(c.members.size() >= params.minClusterSize);
          CHECK(*c.clusterIndex == expectedIndex++);
        } else {
          CHECK(c.members.size() < params.minClusterSize);
        }
      }
      for (int n : cover) CHECK(n == 1);
    }
    CHECK(clusterGallery(g, params, 4) == r);
  }
}

TEST_CASE("cluster gallery counts classes") {
  const auto g = gallery(copies("a", {1, 0}, 20, "Golf") + copies("b", {0, 1}, 20, "Polo"));
  const auto r = clusterGallery(g, {0.9, 20});
  CHECK(r.classCountBefore == 2);
  CHECK(r.classCountAfter == 2);
  const auto j = r.reportJson();
  CHECK(j["class_count_after"] == 2);
}

TEST_CASE("seven bundles yield seven refined labels") {
  const auto g = synthetic::makeBundleGallery("Mercedes-Benz", "C", 7, 25, 16, 0.05, 3);
  const auto r = clusterGallery(g, {0.75, 20});
  CHECK(r.clusterCount == 7);
  CHECK(r.discardedCount == 0);
  const auto relabelled = relabelGallery(g, r, true);
  std::set<std::string> models;
  for (const auto& rec : relabelled.records()) models.insert(rec.model);
  CHECK(models == std::set<std::string>{"C#0", "C#1", "C#2", "C#3", "C#4", "C#5", "C#6"});
}

TEST_CASE("relabel gallery") {
  const auto g = gallery(copies("a", {1, 0}, 25) + copies("o", {0, 1}, 2));
  const auto r = clusterGallery(g, {0.9, 20});
  const auto dropped = relabelGallery(g, r, true);
  CHECK(dropped.size() == 25);
  CHECK(dropped[0].model == "Golf#0");
  const auto kept = relabelGallery(g, r, false);
  CHECK(kept.size() == 27);
  CHECK(kept.find("o1")->model == "Golf");

  const auto other = gallery(copies("z", {1, 0}, 2));
  CHECK_THROWS_AS(relabelGallery(other, r, true), Error);
}

TEST_CASE("empty gallery clusters to nothing") {
  const auto r = clusterGallery(Gallery(4, {}), {0.75, 20});
  CHECK(r.assignments.empty());
  CHECK(r.clusterCount == 0);
}

TEST_CASE("clustering is deterministic") {
  const auto fx = synthetic::makeMultiModeFixture({}, 5);
  const auto a = clusterGallery(fx.train, {0.75, 20}, 1);
  const auto b = clusterGallery(fx.train, {0.75, 20}, 3);
  CHECK(a == b);
  CHECK(a.reportJson().dump() == b.reportJson().dump());
}
