// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "reident/labels.hpp"
#include "reident/parallel.hpp"

namespace reident {

std::size_t densityBin(double score) {
  const auto bin = static_cast<std::size_t>(std::floor(score * static_cast<double>(kDensityBins)));
  return std::min(bin, kDensityBins - 1);
}

ScoreDensities ScoreDensities::fromScores(std::vector<double> client,
                                          std::vector<double> impostor) {
  ScoreDensities d;
  d.binEdges.resize(kDensityBins + 1);
  for (std::size_t i = 0; i <= kDensityBins; ++i) {
    d.binEdges[i] = static_cast<double>(i) / static_cast<double>(kDensityBins);
  }
  d.clientCounts.assign(kDensityBins, 0);
  d.impostorCounts.assign(kDensityBins, 0);
  for (double s : client) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "score outside [0,1]");
    ++d.clientCounts[densityBin(s)];
  }
  for (double s : impostor) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "score outside [0,1]");
    ++d.impostorCounts[densityBin(s)];
  }
  std::sort(client.begin(), client.end());
  std::sort(impostor.begin(), impostor.end());
  d.clientTotal = client.size();
  d.impostorTotal = impostor.size();
  d.clientScores = std::move(client);
  d.impostorScores = std::move(impostor);
  return d;
}

namespace {

struct PairKeys {
  std::size_t model;                    // (make, base model)
  std::optional<std::size_t> cluster;   // (make, refined model) when suffixed
};

std::vector<PairKeys> pairKeys(const Gallery& g) {
  std::map<std::pair<std::string, std::string>, std::size_t> models, clusters;
  std::vector<PairKeys> keys;
  keys.reserve(g.size());
  for (const auto& r : g.records()) {
    const auto name = parseModelName(r.model);
    PairKeys k;
    k.model = models.try_emplace({r.make, name.base}, models.size()).first->second;
    if (name.cluster) {
      k.cluster = clusters.try_emplace({r.make, r.model}, clusters.size()).first->second;
    }
    keys.push_back(k);
  }
  return keys;
}

}  // namespace

ScoreDensities scoreDensities(const Gallery& gallery, PairingLabel pairing, std::size_t threads) {
  const std::size_t n = gallery.size();
  const auto keys = pairKeys(gallery);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = detail::norm64(std::span<const float>(gallery[i].vec));
    if (norms[i] == 0.0) {
      throw Error(ErrorCode::kZeroNormVector,
                  fmt::format("record '{}' has a zero-norm vector", gallery[i].id));
    }
  }

  // Rows are dealt round-robin into chunks so the triangular work balances.
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, threads * 8));
  std::vector<std::vector<double>> client(chunks), impostor(chunks);
  parallelTasks(chunks, threads, [&](std::size_t c) {
    for (std::size_t i = c; i < n; i += chunks) {
      const std::span<const float> a(gallery[i].vec);
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool sameModel = keys[i].model == keys[j].model;
        bool isClient = sameModel;
        if (pairing == PairingLabel::kRefinedCluster && sameModel) {
          if (!keys[i].cluster || keys[i].cluster != keys[j].cluster) continue;
        }
        const double s = detail::scoreFromCosine(detail::cosineFromParts(
            detail::dot64(a, std::span<const float>(gallery[j].vec)), norms[i], norms[j]));
        (isClient ? client[c] : impostor[c]).push_back(s);
      }
    }
  });

  std::vector<double> allClient, allImpostor;
  for (std::size_t c = 0; c < chunks; ++c) {
    allClient.insert(allClient.end(), client[c].begin(), client[c].end());
    allImpostor.insert(allImpostor.end(), impostor[c].begin(), impostor[c].end());
  }
  if (allClient.empty()) throw Error(ErrorCode::kNoClientPairs, "gallery yields no client pairs");
  if (allImpostor.empty()) {
    throw Error(ErrorCode::kNoImpostorPairs, "gallery yields no impostor pairs");
  }
  return ScoreDensities::fromScores(std::move(allClient), std::move(allImpostor));
}

ErrorRates errorRates(const ScoreDensities& densities, std::size_t gridSize) {
  if (gridSize < 2) throw Error(ErrorCode::kInvalidArgument, "threshold grid needs >= 2 points");
  std::vector<double> grid(gridSize);
  for (std::size_t i = 0; i < gridSize; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(gridSize - 1);
  }
  return errorRates(densities, std::move(grid));
}

ErrorRates errorRates(const ScoreDensities& densities, std::vector<double> thresholds) {
  if (densities.clientTotal == 0 || densities.impostorTotal == 0) {
    throw Error(ErrorCode::kEmptyDensity, "error rates need client and impostor scores");
  }
  if (thresholds.empty() || !std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorCode::kInvalidArgument, "threshold grid must be non-empty and ascending");
  }
  const auto& client = densities.clientScores;
  const auto& impostor = densities.impostorScores;
  const double nClient = static_cast<double>(client.size());
  const double nImpostor = static_cast<double>(impostor.size());

  ErrorRates e;
  e.thresholds = std::move(thresholds);
  e.far.reserve(e.thresholds.size());
  e.frr.reserve(e.thresholds.size());
  double bestGap = std::numeric_limits<double>::infinity();
  for (double t : e.thresholds) {
    const auto impostorBelow = std::lower_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
    const auto clientBelow = std::lower_bound(client.begin(), client.end(), t) - client.begin();
    const double far = static_cast<double>(impostor.size() - static_cast<std::size_t>(impostorBelow)) / nImpostor;
    const double frr = static_cast<double>(clientBelow) / nClient;
    e.far.push_back(far);
    e.frr.push_back(frr);
    const double gap = std::abs(far - frr);
    if (gap < bestGap) {
      bestGap = gap;
      e.eerThreshold = t;
      e.eer = (far + frr) / 2.0;
    }
  }
  return e;
}

ThresholdPolicy ThresholdPolicy::parse(std::string_view text) {
  if (text == "eer") return {Kind::kEer, 0.0};
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto kind = text.substr(0, colon);
    const auto value = text.substr(colon + 1);
    double bound = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), bound);
    const bool ok = ec == std::errc() && ptr == value.data() + value.size() && bound >= 0.0 &&
                    bound <= 1.0;
    if (ok && kind == "far") return {Kind::kFarAtMost, bound};
    if (ok && kind == "frr") return {Kind::kFrrAtMost, bound};
  }
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("bad threshold policy '{}' (expected eer, far:<a> or frr:<b>)", text));
}

std::string ThresholdPolicy::toString() const {
  switch (kind) {
    case Kind::kEer: return "eer";
    case Kind::kFarAtMost: return fmt::format("far:{}", bound);
    case Kind::kFrrAtMost: return fmt::format("frr:{}", bound);
  }
  return "eer";
}

double pickThreshold(const ErrorRates& rates, const ThresholdPolicy& policy) {
  switch (policy.kind) {
    case ThresholdPolicy::Kind::kEer:
      return rates.eerThreshold;
    case ThresholdPolicy::Kind::kFarAtMost:
      for (std::size_t i = 0; i < rates.thresholds.size(); ++i) {
        if (rates.far[i] <= policy.bound) return rates.thresholds[i];
      }
      break;
    case ThresholdPolicy::Kind::kFrrAtMost:
      for (std::size_t i = rates.thresholds.size(); i-- > 0;) {
        if (rates.frr[i] <= policy.bound) return rates.thresholds[i];
      }
      break;
  }
  throw Error(ErrorCode::kUnsatisfiable,
              fmt::format("no grid threshold satisfies policy {}", policy.toString()));
}

double clientMassBelowImpostorQuantile(const ScoreDensities& densities, double q) {
  if (densities.clientTotal == 0 || densities.impostorTotal == 0) {
    throw Error(ErrorCode::kEmptyDensity, "quantile mass needs client and impostor scores");
  }
  const auto& imp = densities.impostorScores;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(imp.size())));
  const double cut = imp[std::clamp<std::size_t>(rank, 1, imp.size()) - 1];
  const auto& cl = densities.clientScores;
  const auto below = std::lower_bound(cl.begin(), cl.end(), cut) - cl.begin();
  return static_cast<double>(below) / static_cast<double>(cl.size());
}

bool labelMatches(std::string_view predictedLabel, const EmbeddingRecord& truth,
                  LabelGranularity granularity) {
  const auto predicted = parseClassLabel(predictedLabel);
  if (predicted.make != truth.make) return false;
  if (granularity == LabelGranularity::kMake) return true;
  return predicted.modelName.base == parseModelName(truth.model).base;
}

Rank1Result rank1Accuracy(const HeadModel& model, const Gallery& gallery,
                          std::optional<double> threshold, LabelGranularity granularity) {
  Rank1Result r;
  r.total = gallery.size();
  for (const auto& rec : gallery.records()) {
    const auto p = predict(model, rec.vec);
    if (threshold && p.score < *threshold) continue;
    ++r.accepted;
    if (labelMatches(p.label, rec, granularity)) ++r.correct;
  }
  r.coverage = r.total == 0 ? 0.0 : static_cast<double>(r.accepted) / static_cast<double>(r.total);
  r.accuracy = r.accepted == 0 ? std::numeric_limits<double>::quiet_NaN()
                               : static_cast<double>(r.correct) / static_cast<double>(r.accepted);
  return r;
}

ScoreDensities rank1ScoreDensities(const HeadModel& model, const Gallery& gallery,
                                   LabelGranularity granularity) {
  std::vector<double> correct, wrong;
  for (const auto& rec : gallery.records()) {
    const auto p = predict(model, rec.vec);
    (labelMatches(p.label, rec, granularity) ? correct : wrong).push_back(p.score);
  }
  return ScoreDensities::fromScores(std::move(correct), std::move(wrong));
}

std::vector<TrackBestShot> bestShots(const Gallery& gallery, const HeadModel& model) {
  std::map<std::string, const EmbeddingRecord*> best;
  auto better = [](const EmbeddingRecord& a, const EmbeddingRecord& b) {
    if (*a.quality != *b.quality) return *a.quality > *b.quality;
    if (a.frame != b.frame) {
      if (!a.frame) return false;
      if (!b.frame) return true;
      return *a.frame < *b.frame;
    }
    return a.id < b.id;
  };
  for (const auto& r : gallery.records()) {
    if (!r.trackId) {
      throw Error(ErrorCode::kMissingTrackId, fmt::format("record '{}' has no track id", r.id));
    }
    if (!r.quality) {
      throw Error(ErrorCode::kMissingQuality, fmt::format("record '{}' has no quality", r.id));
    }
    auto [it, inserted] = best.try_emplace(*r.trackId, &r);
    if (!inserted && better(r, *it->second)) it->second = &r;
  }
  std::vector<TrackBestShot> out;
  out.reserve(best.size());
  for (const auto& [track, rec] : best) {
    const auto p = predict(model, rec->vec);
    out.push_back({track, rec->id, *rec->quality, p.label, p.score});
  }
  return out;
}

void checkMonotone(const ErrorRates& rates) {
  for (std::size_t i = 1; i < rates.thresholds.size(); ++i) {
    if (rates.far[i] > rates.far[i - 1]) {
      throw std::logic_error(fmt::format("FAR increases at threshold {}", rates.thresholds[i]));
    }
    if (rates.frr[i] < rates.frr[i - 1]) {
      throw std::logic_error(fmt::format("FRR decreases at threshold {}", rates.thresholds[i]));
    }
  }
}

void emitCurves(const ErrorRates& rates, const std::filesystem::path& path) {
  checkMonotone(rates);
  std::string csv = "threshold,far,frr\n";
  for (std::size_t i = 0; i < rates.thresholds.size(); ++i) {
    csv += fmt::format("{},{},{}\n", rates.thresholds[i], rates.far[i], rates.frr[i]);
  }
  io::writeFile(path, csv);
}

void emitCurves(const ScoreDensities& densities, const std::filesystem::path& path) {
  std::string csv = "bin_lo,bin_hi,client_count,impostor_count\n";
  for (std::size_t b = 0; b < densities.clientCounts.size(); ++b) {
    csv += fmt::format("{},{},{},{}\n", densities.binEdges[b], densities.binEdges[b + 1],
                       densities.clientCounts[b], densities.impostorCounts[b]);
  }
  io::writeFile(path, csv);
}

}  // namespace reident
