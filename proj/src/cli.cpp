// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/cli.hpp"

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "binary_io.hpp"
#include "json.hpp"
#include "reident/clustering.hpp"
#include "reident/eval.hpp"
#include "reident/head.hpp"
#include "reident/ingestion.hpp"
#include "reident/labels.hpp"
#include "reident/reid_index.hpp"
#include "reident/reid_service.hpp"
#include "reident/synthetic.hpp"

namespace reident::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  std::string logLevel = "info";
};

struct IngestArgs {
  fs::path in, out, report;
  std::optional<double> dedupNear;
  double minQuality = 0.0;
};

struct ClusterArgs {
  fs::path in, out, report;
  double threshold = 0.75;
  std::size_t minSize = 20;
  bool keepDiscarded = false;
};

struct TrainArgs {
  fs::path in, out, init;
  std::string variant = "prior-free";
  std::size_t epochs = 30;
  double lr = 0.1;
  std::size_t batchSize = 32;
  double l2 = 0.0;
  double logitScale = 10.0;
};

struct EvalArgs {
  fs::path gallery, head, curves, densities, report;
  std::string policy = "eer";
  std::string granularity = "make-model";
  std::string pairing = "model";
  std::size_t grid = kDefaultGridSize;
  std::optional<double> minQuality;
};

struct BestShotArgs {
  fs::path gallery, head, out;
};

struct IndexArgs {
  fs::path gallery, head, out;
};

struct ServeArgs {
  fs::path index, staticDir;
  std::string host = "127.0.0.1";
  int port = 8080;
  double defaultMinScore = 0.5;
};

struct DemoArgs {
  fs::path out = "reident-demo";
};

std::shared_ptr<spdlog::logger> logger() {
  if (auto existing = spdlog::get("reident")) return existing;
  return spdlog::stderr_logger_mt("reident");
}

void emitJson(const Json& j, const fs::path& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
  } else {
    io::writeFile(path, text);
  }
}

Json rank1Json(const Rank1Result& r) {
  Json j;
  j["accuracy"] = r.noAccepts() ? Json("no-accepts") : Json(r.accuracy);
  j["coverage"] = r.coverage;
  j["correct"] = r.correct;
  j["accepted"] = r.accepted;
  j["total"] = r.total;
  return j;
}

LabelGranularity parseGranularity(const std::string& s) {
  return s == "make" ? LabelGranularity::kMake : LabelGranularity::kMakeModel;
}

// --- stages -----------------------------------------------------------------

void runIngest(const IngestArgs& a) {
  const auto raw = loadGallery(a.in);
  auto [clean, report] = cleanseGallery(raw, {a.dedupNear, a.minQuality});
  if (!a.out.empty()) saveGallery(clean, a.out);
  logger()->info("ingest: {} in, {} out ({} exact, {} near, {} low-quality removed)",
                 report.inputCount, report.outputCount, report.exactDuplicatesRemoved,
                 report.nearDuplicatesRemoved, report.lowQualityRemoved);
  emitJson(report.toJson(), a.report);
}

void runCluster(const ClusterArgs& a, const Globals& g) {
  const auto gallery = loadGallery(a.in);
  const ClusterParams params{a.threshold, a.minSize};
  const auto result = clusterGallery(gallery, params, g.threads);
  if (!a.out.empty()) saveGallery(relabelGallery(gallery, result, !a.keepDiscarded), a.out);
  logger()->info("cluster: {} classes -> {} refined classes, {} records discarded",
                 result.classCountBefore, result.classCountAfter, result.discardedCount);
  emitJson(result.reportJson(), a.report);
}

HeadModel runTrain(const TrainArgs& a, const Globals& g) {
  const auto gallery = loadGallery(a.in);
  TrainConfig cfg;
  cfg.learningRate = a.lr;
  cfg.epochs = a.epochs;
  cfg.batchSize = a.batchSize;
  cfg.l2 = a.l2;
  cfg.seed = g.seed;
  cfg.logitScale = a.logitScale;
  const auto variant = parseVariant(a.variant);
  std::optional<HeadModel> init;
  if (!a.init.empty()) {
    const auto old = loadHead(a.init);
    if (old.variant != variant) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("--init head '{}' is {}, requested {}", a.init.string(),
                              variantName(old.variant), a.variant));
    }
    const auto labels = galleryClassLabels(gallery);
    init = reinitClassificationLayer(old, labels, g.seed);
  }
  const auto head = trainHead(gallery, variant, cfg, init ? &*init : nullptr);
  const auto fit = rank1Accuracy(head, gallery, std::nullopt, LabelGranularity::kMakeModel);
  logger()->info("train-head: {} classes, D={}, training make/model accuracy {:.4f}",
                 head.classCount(), head.dimension, fit.accuracy);
  if (!a.out.empty()) saveHead(head, a.out);
  return head;
}

Json runEval(const EvalArgs& a, const Globals& g) {
  auto gallery = loadGallery(a.gallery);
  if (a.minQuality) gallery = filterQuality(gallery, *a.minQuality).first;
  const auto head = loadHead(a.head);
  const auto granularity = parseGranularity(a.granularity);
  const auto policy = ThresholdPolicy::parse(a.policy);

  Json report;
  report["gallery_count"] = gallery.size();
  report["granularity"] = a.granularity;
  report["policy"] = policy.toString();
  report["rank1"] = {{"make", rank1Json(rank1Accuracy(head, gallery, std::nullopt,
                                                      LabelGranularity::kMake))},
                     {"make_model", rank1Json(rank1Accuracy(head, gallery, std::nullopt,
                                                            LabelGranularity::kMakeModel))}};

  const auto scores = rank1ScoreDensities(head, gallery, granularity);
  report["threshold"] = nullptr;
  if (scores.clientTotal == 0 || scores.impostorTotal == 0) {
    logger()->warn("eval: rank-1 scores are all {}; no error curves",
                   scores.clientTotal == 0 ? "wrong" : "correct");
  } else {
    const auto rates = errorRates(scores, a.grid);
    checkMonotone(rates);
    if (!a.curves.empty()) emitCurves(rates, a.curves);
    report["eer"] = rates.eer;
    report["eer_threshold"] = rates.eerThreshold;
    try {
      const double t = pickThreshold(rates, policy);
      report["threshold"] = t;
      report["rank1_thresholded"] = {
          {"make", rank1Json(rank1Accuracy(head, gallery, t, LabelGranularity::kMake))},
          {"make_model", rank1Json(rank1Accuracy(head, gallery, t, LabelGranularity::kMakeModel))}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnsatisfiable) throw;
      logger()->warn("eval: {}", e.what());
    }
  }

  if (!a.densities.empty()) {
    const auto pairing =
        a.pairing == "cluster" ? PairingLabel::kRefinedCluster : PairingLabel::kModel;
    const auto d = scoreDensities(gallery, pairing, g.threads);
    emitCurves(d, a.densities);
    report["pair_densities"] = {{"pairing", a.pairing},
                                {"client_pairs", d.clientTotal},
                                {"impostor_pairs", d.impostorTotal},
                                {"client_mass_below_impostor_p99",
                                 clientMassBelowImpostorQuantile(d, 0.99)}};
  }
  emitJson(report, a.report);
  return report;
}

Json runBestShots(const BestShotArgs& a) {
  const auto gallery = loadGallery(a.gallery);
  const auto head = loadHead(a.head);
  const auto shots = bestShots(gallery, head);
  Json tracks = Json::array();
  std::size_t shotCorrect = 0;
  for (const auto& s : shots) {
    tracks.push_back({{"track_id", s.trackId},
                      {"record_id", s.recordId},
                      {"quality", s.quality},
                      {"predicted_label", s.predictedLabel},
                      {"score", s.score}});
    if (labelMatches(s.predictedLabel, *gallery.find(s.recordId), LabelGranularity::kMakeModel)) {
      ++shotCorrect;
    }
  }
  const auto perDetection =
      rank1Accuracy(head, gallery, std::nullopt, LabelGranularity::kMakeModel);
  Json out;
  out["track_count"] = shots.size();
  out["best_shot_accuracy"] =
      shots.empty() ? 0.0 : static_cast<double>(shotCorrect) / static_cast<double>(shots.size());
  out["per_detection_accuracy"] = perDetection.accuracy;
  out["tracks"] = std::move(tracks);
  emitJson(out, a.out);
  return out;
}

void runBuildIndex(const IndexArgs& a) {
  const auto gallery = loadGallery(a.gallery);
  const auto head = loadHead(a.head);
  const auto index = buildIndex(gallery, head);
  if (a.out.empty()) {
    std::cout << indexToJson(index).dump(1) << "\n";
  } else {
    saveIndex(index, a.out);
  }
  logger()->info("build-index: {} tracks from {} records", index.entries.size(),
                 index.galleryCount);
}

void runServe(const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.indexPath = a.index;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.defaultMinScore = a.defaultMinScore;
  if (!a.staticDir.empty()) cfg.staticDir = a.staticDir;
  ReidService service(cfg);
  const int port = service.bind();
  const auto meta = service.store().snapshot()->metaJson();
  logger()->info("serve: {} tracks on http://{}:{}", meta["trackCount"].get<std::size_t>(),
                 a.host, port);
  service.serve();
}

void runDemo(const DemoArgs& a, const Globals& g) {
  fs::create_directories(a.out);
  auto path = [&](const char* name) { return a.out / name; };

  synthetic::MultiModeSpec spec;
  spec.makes = 3;
  spec.modelsPerMake = 3;
  spec.modesPerModel = 3;
  spec.trainPerMode = 40;
  spec.testPerMode = 20;
  spec.dimension = 8;
  spec.noise = 0.15;
  spec.exactDuplicates = 12;
  spec.lowQualityRecords = 18;
  const auto fx = synthetic::makeMultiModeFixture(spec, g.seed);
  saveGallery(fx.train, path("raw.jsonl"));
  saveGallery(fx.test, path("test.jsonl"));
  synthetic::TrackSpec trackSpec;
  saveGallery(synthetic::makeTrackGallery(fx.modes, trackSpec, spec.dimension, g.seed + 1),
              path("video.jsonl"));
  logger()->info("demo: fixture with {} modes written to {}", fx.modes.size(), a.out.string());

  runIngest({path("raw.jsonl"), path("clean.jsonl"), path("ingest.json"), 0.9999, 0.3});
  runCluster({path("clean.jsonl"), path("refined.jsonl"), path("clusters.json"), 0.75, 20, false},
             g);
  runCluster({path("clean.jsonl"), path("refined_all.jsonl"), path("clusters_all.json"), 0.75, 20,
              true},
             g);

  TrainArgs train;
  train.epochs = 40;
  train.in = path("clean.jsonl");
  train.out = path("head_raw.ehed");
  runTrain(train, g);
  train.in = path("refined.jsonl");
  train.out = path("head_refined.ehed");
  runTrain(train, g);

  EvalArgs ev;
  ev.gallery = path("test.jsonl");
  ev.policy = "far:0.05";
  ev.head = path("head_raw.ehed");
  ev.curves = path("curves_raw.csv");
  ev.report = path("eval_raw.json");
  const auto rawEval = runEval(ev, g);
  ev.head = path("head_refined.ehed");
  ev.curves = path("curves_refined.csv");
  ev.report = path("eval_refined.json");
  const auto refinedEval = runEval(ev, g);

  const auto refinedAll = loadGallery(path("refined_all.jsonl"));
  const auto byModel = scoreDensities(refinedAll, PairingLabel::kModel, g.threads);
  const auto byCluster = scoreDensities(refinedAll, PairingLabel::kRefinedCluster, g.threads);
  emitCurves(byModel, path("densities_model.csv"));
  emitCurves(byCluster, path("densities_cluster.csv"));

  const auto shots = runBestShots({path("video.jsonl"), path("head_refined.ehed"),
                                   path("best_shots.json")});
  runBuildIndex({path("video.jsonl"), path("head_refined.ehed"), path("index.json")});

  const auto prior = synthetic::makePriorFixture({}, g.seed);
  saveGallery(prior.train, path("prior_train.jsonl"));
  saveGallery(prior.test, path("prior_test.jsonl"));
  TrainArgs priorArgs;
  priorArgs.in = path("prior_train.jsonl");
  priorArgs.variant = "biased";
  priorArgs.out = path("head_prior_biased.ehed");
  const auto biasedHead = runTrain(priorArgs, g);
  priorArgs.variant = "prior-free";
  priorArgs.out = path("head_prior_free.ehed");
  const auto freeHead = runTrain(priorArgs, g);
  auto minorityRecall = [&](const HeadModel& head) {
    std::size_t hits = 0, total = 0;
    for (const auto& r : prior.test.records()) {
      if (r.model != "Minor") continue;
      ++total;
      if (predict(head, r.vec).label == classLabel(r.make, r.model)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  };

  const auto clusters = nlohmann::json::parse(io::readFile(path("clusters.json")));
  const double massModel = clientMassBelowImpostorQuantile(byModel);
  const double massCluster = clientMassBelowImpostorQuantile(byCluster);
  auto acc = [](const Json& report) {
    return report["rank1"]["make_model"]["accuracy"].get<double>();
  };
  std::cout << fmt::format(
      "classes: {} make/model labels -> {} refined clusters ({} records discarded)\n"
      "client scores below impostor p99: {:.4f} by model, {:.4f} by cluster\n"
      "held-out make/model rank-1: {:.4f} raw labels, {:.4f} refined labels\n"
      "video: best-shot accuracy {:.4f} vs per-detection {:.4f} over {} tracks\n"
      "imbalanced prior: minority recall {:.4f} biased, {:.4f} prior-free\n"
      "outputs in {}\n",
      clusters["class_count_before"].get<std::size_t>(),
      clusters["class_count_after"].get<std::size_t>(),
      clusters["discarded_count"].get<std::size_t>(), massModel, massCluster,
      acc(rawEval), acc(refinedEval), shots["best_shot_accuracy"].get<double>(),
      shots["per_detection_accuracy"].get<double>(), shots["track_count"].get<std::size_t>(),
      minorityRecall(biasedHead), minorityRecall(freeHead), a.out.string());
}

// --- argument wiring --------------------------------------------------------

CLI::Option* positiveRange(CLI::Option* opt) { return opt->check(CLI::Range(0.0, 1.0)); }

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"reident: embedding gallery refinement, evaluation and re-identification search",
               "reident"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for pairwise scoring")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}))
      ->capture_default_str();
  app.add_option("--log-level", g.logLevel, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  IngestArgs ingest;
  auto* ingestCmd = app.add_subcommand("ingest", "Remove duplicates and low-quality records");
  ingestCmd->add_option("--in", ingest.in, "Raw gallery (.jsonl or .egal)")->required();
  ingestCmd->add_option("--out", ingest.out, "Cleaned gallery");
  positiveRange(ingestCmd->add_option("--dedup-near", ingest.dedupNear,
                                      "Near-duplicate match-score threshold"));
  positiveRange(ingestCmd->add_option("--min-quality", ingest.minQuality, "Minimum quality"))
      ->capture_default_str();
  ingestCmd->add_option("--report", ingest.report, "Cleansing report JSON (default: stdout)");

  ClusterArgs cluster;
  auto* clusterCmd = app.add_subcommand("cluster", "Split make/model labels into sub-clusters");
  clusterCmd->add_option("--in", cluster.in, "Cleaned gallery")->required();
  clusterCmd->add_option("--out", cluster.out, "Relabelled gallery");
  positiveRange(clusterCmd->add_option("--threshold", cluster.threshold,
                                       "Neighbourhood match-score threshold"))
      ->capture_default_str();
  clusterCmd->add_option("--min-size", cluster.minSize, "Minimum accepted cluster size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  clusterCmd->add_flag("--keep-discarded", cluster.keepDiscarded,
                       "Keep records of undersized clusters with their original label");
  clusterCmd->add_option("--report", cluster.report, "Cluster report JSON (default: stdout)");

  TrainArgs train;
  auto* trainCmd = app.add_subcommand("train-head", "Train a linear classification head");
  trainCmd->add_option("--in", train.in, "Labelled gallery")->required();
  trainCmd->add_option("--out", train.out, "Head file (.ehed)");
  trainCmd->add_option("--variant", train.variant, "biased|prior-free")
      ->check(CLI::IsMember({"biased", "prior-free"}))
      ->capture_default_str();
  trainCmd->add_option("--epochs", train.epochs)->capture_default_str();
  trainCmd->add_option("--lr", train.lr, "Learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  trainCmd->add_option("--batch-size", train.batchSize)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  trainCmd->add_option("--l2", train.l2, "L2 penalty on centroids (biased)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  trainCmd->add_option("--logit-scale", train.logitScale, "Training softmax scale (prior-free)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  trainCmd->add_option("--init", train.init, "Warm-start from an existing head");

  EvalArgs eval;
  auto* evalCmd = app.add_subcommand("eval", "Rank-1 accuracy, error curves and thresholds");
  evalCmd->add_option("--gallery", eval.gallery, "Evaluation gallery")->required();
  evalCmd->add_option("--head", eval.head, "Head file")->required();
  evalCmd->add_option("--curves", eval.curves, "FAR/FRR CSV output");
  evalCmd->add_option("--densities", eval.densities, "Pair score density CSV output");
  evalCmd->add_option("--pairing", eval.pairing, "model|cluster pairing for --densities")
      ->check(CLI::IsMember({"model", "cluster"}))
      ->capture_default_str();
  evalCmd->add_option("--policy", eval.policy, "eer | far:<alpha> | frr:<beta>")
      ->capture_default_str();
  evalCmd->add_option("--granularity", eval.granularity, "make|make-model")
      ->check(CLI::IsMember({"make", "make-model"}))
      ->capture_default_str();
  evalCmd->add_option("--grid", eval.grid, "Threshold grid size")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1000000}))
      ->capture_default_str();
  positiveRange(evalCmd->add_option("--min-quality", eval.minQuality,
                                    "Evaluate only records at or above this quality"));
  evalCmd->add_option("--report", eval.report, "Report JSON (default: stdout)");

  BestShotArgs best;
  auto* bestCmd = app.add_subcommand("best-shots", "Classify the best shot of every track");
  bestCmd->add_option("--gallery", best.gallery, "Video gallery")->required();
  bestCmd->add_option("--head", best.head, "Head file")->required();
  bestCmd->add_option("--out", best.out, "JSON output (default: stdout)");

  IndexArgs index;
  auto* indexCmd = app.add_subcommand("build-index", "Build the re-identification index");
  indexCmd->add_option("--gallery", index.gallery, "Video gallery")->required();
  indexCmd->add_option("--head", index.head, "Head file")->required();
  indexCmd->add_option("--out", index.out, "Index file (default: stdout)");

  ServeArgs serve;
  auto* serveCmd = app.add_subcommand("serve", "Serve the search API over an index");
  serveCmd->add_option("--index", serve.index, "Index file")->envname("REIDENT_INDEX")->required();
  serveCmd->add_option("--host", serve.host)->envname("REIDENT_HOST")->capture_default_str();
  serveCmd->add_option("--port", serve.port)
      ->envname("REIDENT_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  positiveRange(serveCmd->add_option("--default-min-score", serve.defaultMinScore)
                    ->envname("REIDENT_DEFAULT_MIN_SCORE"))
      ->capture_default_str();
  serveCmd->add_option("--static", serve.staticDir, "Directory of web UI assets to serve at /");

  DemoArgs demo;
  auto* demoCmd = app.add_subcommand("demo", "Run the full pipeline on a synthetic fixture");
  demoCmd->add_option("--out", demo.out, "Output directory")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  auto log = logger();
  log->set_level(spdlog::level::from_str(g.logLevel));
  CLI::App* sub = app.get_subcommands().front();
  log->info("{} config: seed={} threads={}\n{}", sub->get_name(), g.seed, g.threads,
            sub->config_to_str(true, false));

  try {
    if (sub == ingestCmd) runIngest(ingest);
    if (sub == clusterCmd) runCluster(cluster, g);
    if (sub == trainCmd) runTrain(train, g);
    if (sub == evalCmd) runEval(eval, g);
    if (sub == bestCmd) runBestShots(best);
    if (sub == indexCmd) runBuildIndex(index);
    if (sub == serveCmd) runServe(serve);
    if (sub == demoCmd) runDemo(demo, g);
  } catch (const Error& e) {
    std::cerr << "error: " << errorName(e.code()) << ": " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace reident::cli
