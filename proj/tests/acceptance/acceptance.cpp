// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "oracles.hpp"
#include "reident/cli.hpp"
#include "reident/clustering.hpp"
#include "reident/eval.hpp"
#include "reident/head.hpp"
#include "reident/reid_index.hpp"
#include "reident/reid_service.hpp"
#include "reident/synthetic.hpp"

namespace fs = std::filesystem;
using namespace reident;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / fmt::format("reident-acceptance-{}", name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string readBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Runs the CLI in-process with its stdout swallowed.
int runCli(std::vector<std::string> args) {
  args.insert(args.begin(), "reident");
  args.push_back("--log-level");
  args.push_back("error");
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = cli::run(args);
  std::cout.rdbuf(old);
  return rc;
}

Gallery refine(const Gallery& g, const ClusterParams& params) {
  return relabelGallery(g, clusterGallery(g, params), true);
}

HeadModel train(const Gallery& g, HeadVariant variant, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  return trainHead(g, variant, cfg);
}

synthetic::MultiModeSpec multiModeSpec() {
  synthetic::MultiModeSpec spec;
  spec.makes = 3;
  spec.modelsPerMake = 3;
  spec.modesPerModel = 3;
  spec.dimension = 8;
  return spec;
}

// 1 ---------------------------------------------------------------------------

Outcome clusteringOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20260101);
  std::size_t mismatches = 0, clusters = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 2 + rng() % 3;
    const std::size_t classes = 1 + rng() % 3;
    std::vector<EmbeddingRecord> records;
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t count = 1 + rng() % 12;
      for (std::size_t i = 0; i < count; ++i) {
        EmbeddingRecord r{fmt::format("t{}-c{}-{}", trial, c, i), "Make", fmt::format("C{}", c),
                          {}, {}, {}, {}, {}};
        r.vec.resize(dim);
        for (float& x : r.vec) x = n(rng);
        records.push_back(std::move(r));
      }
    }
    const double threshold = std::uniform_real_distribution<double>(0.5, 0.95)(rng);
    const std::size_t minSize = 1 + rng() % 4;
    const Gallery g(dim, records);
    const auto result = clusterGallery(g, {threshold, minSize});
    for (const auto& group : result.groups) {
      std::vector<EmbeddingRecord> members;
      for (const auto& r : records) {
        if (r.model == group.model) members.push_back(r);
      }
      const auto expected = oracle::densityClusters(members, threshold, minSize);
      if (expected != group.clusters) ++mismatches;
      clusters += expected.size();
    }
  }
  const double secs = secondsSince(start);
  return {mismatches == 0 && secs < 10.0,
          fmt::format("200 galleries, {} extracted clusters, {} group mismatches, {:.2f} s",
                      clusters, mismatches, secs)};
}

// 2 ---------------------------------------------------------------------------

Outcome sevenBundles() {
  const auto g = synthetic::makeBundleGallery("Mercedes-Benz", "C", 7, 25, 16, 0.05, 7);
  const auto result = clusterGallery(g, {0.75, 20});
  std::size_t undersized = 0;
  for (const auto& c : result.groups.at(0).clusters) {
    if (c.clusterIndex && c.members.size() < 20) ++undersized;
  }
  return {result.clusterCount == 7 && result.discardedCount == 0 && undersized == 0,
          fmt::format("{} accepted clusters, {} discarded records", result.clusterCount,
                      result.discardedCount)};
}

// 3 ---------------------------------------------------------------------------

Outcome refinedPairing() {
  const auto start = Clock::now();
  synthetic::MultiModeSpec spec;
  spec.modesPerModel = 2;
  const auto fx = synthetic::makeMultiModeFixture(spec, 7);
  const auto result = clusterGallery(fx.train, {0.75, 20});
  const auto refined = relabelGallery(fx.train, result, false);
  const double byModel =
      clientMassBelowImpostorQuantile(scoreDensities(refined, PairingLabel::kModel));
  const double byCluster =
      clientMassBelowImpostorQuantile(scoreDensities(refined, PairingLabel::kRefinedCluster));
  const double drop = byModel > 0 ? (byModel - byCluster) / byModel : 0.0;
  const double secs = secondsSince(start);
  return {drop >= 0.5 && secs < 5.0,
          fmt::format("mass below impostor p99: {:.4f} by model, {:.4f} by cluster, "
                      "relative drop {:.1f}%, {:.2f} s",
                      byModel, byCluster, 100 * drop, secs)};
}

// 4 ---------------------------------------------------------------------------

struct PriorStats {
  double balancedAccuracy = 0.0;
  double tvToUniform = 0.0;
};

PriorStats priorStats(const HeadModel& head, const Gallery& test) {
  std::map<std::string, std::size_t> total, correct, predicted;
  for (const auto& r : test.records()) {
    const auto label = predict(head, r.vec).label;
    const auto truth = r.make + "/" + r.model;
    ++total[truth];
    ++predicted[label];
    if (label == truth) ++correct[truth];
  }
  PriorStats s;
  for (const auto& [label, n] : total) s.balancedAccuracy += double(correct[label]) / double(n);
  s.balancedAccuracy /= double(total.size());
  const double uniform = 1.0 / double(head.classCount());
  for (const auto& label : head.labels) {
    s.tvToUniform += std::abs(double(predicted[label]) / double(test.size()) - uniform);
  }
  s.tvToUniform /= 2.0;
  return s;
}

Outcome priorRemoval() {
  const auto start = Clock::now();
  int holds = 0;
  double sumBiased = 0, sumFree = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto fx = synthetic::makePriorFixture({}, seed);
    const auto biased = priorStats(train(fx.train, HeadVariant::kBiased, seed), fx.test);
    const auto free = priorStats(train(fx.train, HeadVariant::kPriorFree, seed), fx.test);
    sumBiased += biased.balancedAccuracy;
    sumFree += free.balancedAccuracy;
    if (free.balancedAccuracy >= biased.balancedAccuracy && free.tvToUniform < biased.tvToUniform) {
      ++holds;
    }
  }
  const double secs = secondsSince(start);
  return {holds >= 18 && secs < 60.0,
          fmt::format("holds in {}/20 seeds; mean balanced accuracy {:.4f} prior-free vs "
                      "{:.4f} biased; {:.2f} s",
                      holds, sumFree / 20, sumBiased / 20, secs)};
}

// 5 ---------------------------------------------------------------------------

Outcome gradientChecks() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t classes = 2 + rng() % 4;
    const std::size_t dim = 1 + rng() % 8;
    const auto variant = i % 2 ? HeadVariant::kBiased : HeadVariant::kPriorFree;
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < classes; ++c) labels.push_back(fmt::format("M/c{}", c));
    auto model = initHead(labels, dim, variant, rng());
    std::normal_distribution<double> n(0.0, 1.0);
    if (variant == HeadVariant::kBiased) {
      for (double& w : model.centroids) w = n(rng);
      for (double& b : *model.bias) b = n(rng);
    }
    const std::size_t batch = 1 + rng() % 6;
    std::vector<std::vector<double>> xs(batch, std::vector<double>(dim));
    std::vector<Example> examples;
    for (auto& x : xs) {
      for (double& v : x) v = n(rng);
      examples.push_back({x, rng() % classes});
    }
    TrainConfig cfg;
    cfg.l2 = i % 3 == 0 ? 0.01 : 0.0;
    worst = std::max(worst, gradientCheck(model, examples, cfg));
  }
  return {worst <= 1e-4, fmt::format("50 instances, max relative error {:.3e}", worst)};
}

// 6 ---------------------------------------------------------------------------

Outcome farFrr(const fs::path& dir) {
  std::size_t mismatches = 0, curves = 0, nonMonotone = 0, boundary = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    synthetic::MultiModeSpec spec;
    spec.makes = 2;
    spec.trainPerMode = 10 + seed % 5 * 5;
    spec.testPerMode = 1;
    spec.dimension = 4;
    spec.noise = 0.4;
    const auto fx = synthetic::makeMultiModeFixture(spec, seed);
    const auto refined = relabelGallery(fx.train, clusterGallery(fx.train, {0.8, 3}), false);
    for (bool byCluster : {false, true}) {
      const auto d = scoreDensities(
          refined, byCluster ? PairingLabel::kRefinedCluster : PairingLabel::kModel, 1 + seed % 3);
      const auto pairs = oracle::allPairs(refined, byCluster);
      std::vector<double> grid;
      for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
      for (double s : pairs.client) grid.push_back(s);
      for (double s : pairs.impostor) grid.push_back(s);
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      const auto rates = errorRates(d, grid);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (rates.far[i] != oracle::far(pairs, grid[i]) ||
            rates.frr[i] != oracle::frr(pairs, grid[i])) {
          ++mismatches;
        }
      }
      for (const auto& r : {rates, errorRates(d)}) {
        ++curves;
        const auto path = dir / fmt::format("curve{}.csv", curves);
        try {
          emitCurves(r, path);
        } catch (const std::logic_error&) {
          ++nonMonotone;
        }
        for (std::size_t i = 1; i < r.thresholds.size(); ++i) {
          if (r.far[i] > r.far[i - 1] || r.frr[i] < r.frr[i - 1]) ++nonMonotone;
        }
        if (r.thresholds.front() != 0.0 || r.far.front() != 1.0 || r.frr.front() != 0.0) {
          ++boundary;
        }
      }
    }
  }
  return {mismatches == 0 && nonMonotone == 0 && boundary == 0,
          fmt::format("{} curves; {} brute-force mismatches, {} monotonicity violations, {} "
                      "boundary violations",
                      curves, mismatches, nonMonotone, boundary)};
}

// 7 ---------------------------------------------------------------------------

Outcome bestShot() {
  int holds = 0;
  double sumShot = 0, sumDetection = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto spec = multiModeSpec();
    const auto fx = synthetic::makeMultiModeFixture(spec, seed);
    const auto head = train(refine(fx.train, {0.75, 20}), HeadVariant::kPriorFree, seed);
    const auto video =
        synthetic::makeTrackGallery(fx.modes, {}, spec.dimension, seed + 1000);
    const auto shots = bestShots(video, head);
    std::size_t correct = 0;
    for (const auto& s : shots) {
      if (labelMatches(s.predictedLabel, *video.find(s.recordId), LabelGranularity::kMakeModel)) {
        ++correct;
      }
    }
    const double shotAcc = double(correct) / double(shots.size());
    const double detAcc =
        rank1Accuracy(head, video, std::nullopt, LabelGranularity::kMakeModel).accuracy;
    sumShot += shotAcc;
    sumDetection += detAcc;
    if (shotAcc >= detAcc) ++holds;
  }
  return {holds >= 18, fmt::format("holds in {}/20 seeds; mean accuracy {:.4f} best-shot vs "
                                   "{:.4f} per-detection",
                                   holds, sumShot / 20, sumDetection / 20)};
}

// 8 ---------------------------------------------------------------------------

Outcome clusteringProtocol() {
  int holds = 0;
  double sumRaw = 0, sumRefined = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto fx = synthetic::makeMultiModeFixture(multiModeSpec(), seed);
    const auto raw = train(fx.train, HeadVariant::kPriorFree, seed);
    const auto refined = train(refine(fx.train, {0.75, 20}), HeadVariant::kPriorFree, seed);
    const double a = rank1Accuracy(raw, fx.test, std::nullopt, LabelGranularity::kMakeModel).accuracy;
    const double b =
        rank1Accuracy(refined, fx.test, std::nullopt, LabelGranularity::kMakeModel).accuracy;
    sumRaw += a;
    sumRefined += b;
    if (b > a) ++holds;
  }
  return {holds >= 8, fmt::format("holds in {}/10 seeds; mean held-out accuracy {:.4f} refined vs "
                                  "{:.4f} raw",
                                  holds, sumRefined / 10, sumRaw / 10)};
}

// 9 ---------------------------------------------------------------------------

std::map<std::string, std::uint64_t> hashTree(const fs::path& dir) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = fnv1a(readBytes(e.path()));
  }
  return out;
}

Outcome determinism(const fs::path& dir) {
  std::vector<std::string> failures;
  std::size_t compared = 0;
  auto compareRuns = [&](const std::string& name,
                         const std::function<std::vector<std::string>(const fs::path&)>& argv) {
    std::map<std::string, std::uint64_t> hashes[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = dir / fmt::format("{}-{}", name, run);
      fs::create_directories(out);
      if (runCli(argv(out)) != 0) {
        failures.push_back(name + " exited non-zero");
        return;
      }
      hashes[run] = hashTree(out);
    }
    compared += hashes[0].size();
    if (hashes[0].empty() || hashes[0] != hashes[1]) failures.push_back(name);
  };

  compareRuns("demo", [](const fs::path& out) {
    return std::vector<std::string>{"demo", "--out", out.string(), "--seed", "7"};
  });
  const fs::path d = dir / "demo-0";
  auto p = [&](const char* f) { return (d / f).string(); };
  compareRuns("ingest", [&](const fs::path& out) {
    return std::vector<std::string>{"ingest", "--in", p("raw.jsonl"), "--out",
                                    (out / "clean.egal").string(), "--dedup-near", "0.99",
                                    "--min-quality", "0.3", "--report",
                                    (out / "report.json").string()};
  });
  compareRuns("cluster", [&](const fs::path& out) {
    return std::vector<std::string>{"cluster", "--in", p("clean.jsonl"), "--out",
                                    (out / "refined.jsonl").string(), "--report",
                                    (out / "clusters.json").string(), "--threads", "3"};
  });
  for (const char* variant : {"biased", "prior-free"}) {
    compareRuns(fmt::format("train-{}", variant), [&](const fs::path& out) {
      return std::vector<std::string>{"train-head", "--in", p("refined.jsonl"), "--variant",
                                      variant, "--seed", "11", "--out",
                                      (out / "head.ehed").string()};
    });
  }
  compareRuns("train-warm", [&](const fs::path& out) {
    return std::vector<std::string>{"train-head", "--in", p("refined.jsonl"), "--init",
                                    p("head_raw.ehed"), "--epochs", "5", "--out",
                                    (out / "head.ehed").string()};
  });
  compareRuns("eval", [&](const fs::path& out) {
    return std::vector<std::string>{
        "eval",        "--gallery", p("test.jsonl"), "--head", p("head_raw.ehed"), "--curves",
        (out / "curves.csv").string(), "--densities", (out / "dens.csv").string(), "--pairing",
        "model", "--policy", "frr:0.2", "--threads", "2", "--report",
        (out / "eval.json").string()};
  });
  compareRuns("best-shots", [&](const fs::path& out) {
    return std::vector<std::string>{"best-shots", "--gallery", p("video.jsonl"), "--head",
                                    p("head_refined.ehed"), "--out",
                                    (out / "shots.json").string()};
  });
  compareRuns("build-index", [&](const fs::path& out) {
    return std::vector<std::string>{"build-index", "--gallery", p("video.jsonl"), "--head",
                                    p("head_refined.ehed"), "--out",
                                    (out / "index.json").string()};
  });
  std::string detail = fmt::format("{} output files hash-identical across paired runs", compared);
  for (const auto& f : failures) detail += "; differs: " + f;
  return {failures.empty(), detail};
}

// 10 --------------------------------------------------------------------------

Outcome serviceContract(const fs::path& dir) {
  const fs::path demo = dir / "demo-0";
  const auto indexA = loadIndex(demo / "index.json");
  const auto video = loadGallery(demo / "video.jsonl");
  std::vector<EmbeddingRecord> half;
  for (const auto& r : video.records()) {
    if (*r.trackId < "trk0030") half.push_back(r);
  }
  const auto indexB = buildIndex(Gallery(video.dimension(), half), loadHead(demo / "head_refined.ehed"));
  std::vector<std::string> failures;

  // Anti-monotonicity and search/detail consistency over every make/model/color.
  std::set<std::string> makes, models, colors;
  for (const auto& e : indexA.entries) {
    makes.insert(e.predictedMake);
    models.insert(e.predictedModel);
    if (e.color) colors.insert(e.color->name);
  }
  std::vector<SearchQuery> queries;
  for (const auto& m : makes) queries.push_back({m, {}, {}, {}, 50});
  for (const auto& m : models) queries.push_back({{}, m, {}, {}, 50});
  for (const auto& c : colors) queries.push_back({{}, {}, c, {}, 50});
  std::size_t checks = 0;
  for (auto q : queries) {
    std::size_t previous = SIZE_MAX;
    for (int step = 0; step <= 20; ++step) {
      q.minScore = step / 20.0;
      const auto result = search(indexA, q, 0.5);
      if (result.entries.size() > previous) failures.push_back("minScore anti-monotonicity");
      previous = result.entries.size();
      for (const auto& e : result.entries) {
        ++checks;
        const auto& members = trackDetail(indexA, e.trackId);
        const bool hasShot = std::any_of(members.begin(), members.end(),
                                         [&](const TrackMember& m) { return m.id == e.recordId; });
        if (!hasShot) failures.push_back("detail lacks best shot of " + e.trackId);
      }
    }
  }

  // Live reload between two index versions while clients query.
  const fs::path live = dir / "live-index.json";
  saveIndex(indexA, live);
  ServiceConfig cfg;
  cfg.indexPath = live;
  cfg.port = 0;
  ReidService service(cfg);
  const int port = service.bind();
  std::thread server([&] { service.serve(); });
  service.waitUntilReady();

  const QueryParams params{{"make", *makes.begin()}, {"min_score", "0.3"}};
  const std::set<std::string> allowedSearch = {handleSearch(indexA, params, 0.5).body,
                                               handleSearch(indexB, params, 0.5).body};
  const std::set<std::string> allowedMeta = {handleMeta(indexA).body, handleMeta(indexB).body};
  const std::string path = "/api/search?make=" + httplib::detail::encode_url(*makes.begin()) +
                           "&min_score=0.3";
  std::atomic<bool> done{false};
  std::atomic<std::size_t> requests{0}, bad{0}, fileErrors{0};
  std::set<std::string> seenMeta;
  std::mutex seenMu;
  std::vector<std::thread> clients;
  for (int c = 0; c < 3; ++c) {
    clients.emplace_back([&] {
      httplib::Client client("127.0.0.1", port);
      while (!done) {
        auto s = client.Get(path);
        auto m = client.Get("/api/meta");
        ++requests;
        if (!s || s->status != 200 || !allowedSearch.count(s->body)) ++bad;
        if (!m || m->status != 200 || !allowedMeta.count(m->body)) {
          ++bad;
        } else {
          std::lock_guard lock(seenMu);
          seenMeta.insert(m->body);
        }
      }
    });
  }
  std::thread fileReader([&] {
    while (!done) {
      try {
        const auto idx = loadIndex(live);
        if (!(idx == indexA || idx == indexB)) ++fileErrors;
      } catch (const std::exception&) {
        ++fileErrors;
      }
    }
  });
  httplib::Client admin("127.0.0.1", port);
  std::size_t reloadFailures = 0;
  for (int i = 0; i < 40; ++i) {
    saveIndex(i % 2 ? indexA : indexB, live);
    auto r = admin.Post("/api/reload");
    if (!r || r->status != 200) ++reloadFailures;
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  done = true;
  for (auto& t : clients) t.join();
  fileReader.join();
  service.stop();
  server.join();

  if (bad) failures.push_back(fmt::format("{} inconsistent responses", bad.load()));
  if (fileErrors) failures.push_back(fmt::format("{} partial index reads", fileErrors.load()));
  if (reloadFailures) failures.push_back(fmt::format("{} failed reloads", reloadFailures));
  if (seenMeta.size() != 2) failures.push_back("clients did not observe both index versions");
  std::string detail = fmt::format(
      "{} queries x 21 thresholds, {} hit/detail checks, {} concurrent request pairs across 40 "
      "reloads",
      queries.size(), checks, requests.load());
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  const fs::path dir = scratchDir("work");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"clustering matches exhaustive oracle", clusteringOracle},
      {"seven-bundle class yields seven clusters", sevenBundles},
      {"refined pairing halves low client mass", refinedPairing},
      {"prior-free head removes class prior", priorRemoval},
      {"analytic gradients match finite differences", gradientChecks},
      {"FAR/FRR match brute-force pair counts", [&] { return farFrr(dir); }},
      {"best-shot beats per-detection accuracy", bestShot},
      {"refined labels beat raw labels", clusteringProtocol},
      {"pipeline stages are deterministic", [&] { return determinism(dir); }},
      {"service search and reload contract", [&] { return serviceContract(dir); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("criterion {:>2}: {} | {} | {}", i + 1, o.pass ? "PASS" : "FAIL",
                             criteria[i].first, o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", criteria.size() - failed, criteria.size())
            << std::endl;
  return failed == 0 ? 0 : 1;
}
