// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace reident::synthetic {

namespace {

using Rng = std::mt19937_64;

std::vector<double> gaussian(Rng& rng, std::size_t d, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  std::vector<double> v(d);
  for (double& x : v) x = n(rng);
  return v;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= n;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<float> sample(const std::vector<double>& center, double noise, Rng& rng) {
  const double perDim = noise / std::sqrt(static_cast<double>(center.size()));
  auto g = gaussian(rng, center.size(), perDim);
  std::vector<float> out(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) out[i] = static_cast<float>(center[i] + g[i]);
  return out;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string makeName(std::size_t i) {
  static const std::array<const char*, 8> names = {"Volkswagen", "Seat",   "Mercedes-Benz",
                                                   "Audi",       "Toyota", "Ford",
                                                   "Renault",    "Skoda"};
  return i < names.size() ? names[i] : fmt::format("Make{}", i);
}

std::string modelName(std::size_t make, std::size_t model) {
  return fmt::format("M{}{}", make, static_cast<char>('A' + model % 26));
}

}  // namespace

MultiModeFixture makeMultiModeFixture(const MultiModeSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  MultiModeFixture fx;
  for (std::size_t mk = 0; mk < spec.makes; ++mk) {
    for (std::size_t md = 0; md < spec.modelsPerMake; ++md) {
      std::vector<std::vector<double>> centers;
      // Rejection sampling keeps modes of one model well apart; modes of
      // different models are unconstrained and may lie close together.
      for (int attempt = 0; centers.size() < spec.modesPerModel; ++attempt) {
        auto c = gaussian(rng, spec.dimension, 1.0);
        normalize(c);
        const bool apart = std::all_of(centers.begin(), centers.end(), [&](const auto& o) {
          return std::abs(cosine(c, o)) < spec.maxModeCosine;
        });
        if (apart || attempt > 10000) centers.push_back(std::move(c));
      }
      for (auto& c : centers) fx.modes.push_back({makeName(mk), modelName(mk, md), std::move(c)});
    }
  }

  std::vector<EmbeddingRecord> train, test;
  std::size_t nextId = 0;
  for (const auto& mode : fx.modes) {
    for (std::size_t i = 0; i < spec.trainPerMode; ++i) {
      EmbeddingRecord r{fmt::format("tr{:06}", nextId++), mode.make, mode.model, {}, {}, {}, {}, {}};
      r.quality = uniform(rng, 0.5, 1.0);
      r.vec = sample(mode.center, spec.noise, rng);
      train.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < spec.testPerMode; ++i) {
      EmbeddingRecord r{fmt::format("te{:06}", nextId++), mode.make, mode.model, {}, {}, {}, {}, {}};
      r.quality = uniform(rng, 0.5, 1.0);
      r.vec = sample(mode.center, spec.noise, rng);
      test.push_back(std::move(r));
    }
  }
  for (std::size_t i = 0; i < spec.lowQualityRecords && !fx.modes.empty(); ++i) {
    const auto& mode = fx.modes[i % fx.modes.size()];
    EmbeddingRecord r{fmt::format("lq{:06}", i), mode.make, mode.model, {}, {}, {}, {}, {}};
    r.quality = uniform(rng, 0.0, 0.2);
    r.vec = sample(mode.center, 1.5, rng);
    train.push_back(std::move(r));
  }
  const std::size_t originals = train.size();
  for (std::size_t i = 0; i < spec.exactDuplicates && originals > 0; ++i) {
    EmbeddingRecord copy = train[(i * 7919) % originals];
    copy.id = fmt::format("dup{:06}", i);
    train.push_back(std::move(copy));
  }
  fx.train = Gallery(spec.dimension, std::move(train));
  fx.test = Gallery(spec.dimension, std::move(test));
  return fx;
}

PriorFixture makePriorFixture(const PriorSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> means(2, std::vector<double>(spec.dimension, 0.0));
  means[0][0] = means[1][0] = std::cos(spec.halfAngle);
  means[0][1] = std::sin(spec.halfAngle);
  means[1][1] = -std::sin(spec.halfAngle);
  const std::array<const char*, 2> models = {"Major", "Minor"};

  auto record = [&](const std::string& id, std::size_t cls) {
    EmbeddingRecord r{id, "Prior", models[cls], {}, {}, {}, {}, {}};
    r.vec = sample(means[cls], spec.noise, rng);
    return r;
  };
  std::vector<EmbeddingRecord> train, test;
  for (std::size_t i = 0; i < spec.trainCount; ++i) {
    const std::size_t cls = uniform(rng, 0.0, 1.0) < spec.majorityFraction ? 0 : 1;
    train.push_back(record(fmt::format("ptr{:06}", i), cls));
  }
  for (std::size_t i = 0; i < 2 * spec.testPerClass; ++i) {
    test.push_back(record(fmt::format("pte{:06}", i), i % 2));
  }
  return {Gallery(spec.dimension, std::move(train)), Gallery(spec.dimension, std::move(test))};
}

Gallery makeTrackGallery(const std::vector<ModeCenter>& modes, const TrackSpec& spec,
                         std::size_t dimension, std::uint64_t seed) {
  static const std::array<const char*, 5> palette = {"white", "black", "silver", "red", "blue"};
  Rng rng(seed);
  std::vector<EmbeddingRecord> records;
  for (std::size_t t = 0; t < spec.tracks; ++t) {
    const auto& mode = modes[std::uniform_int_distribution<std::size_t>(0, modes.size() - 1)(rng)];
    const Color color{palette[std::uniform_int_distribution<std::size_t>(0, palette.size() - 1)(rng)],
                      uniform(rng, 0.6, 1.0)};
    const std::string track = fmt::format("trk{:04}", t);
    for (std::size_t k = 0; k < spec.detectionsPerTrack; ++k) {
      EmbeddingRecord r{fmt::format("{}-d{:02}", track, k), mode.make, mode.model, track,
                        t * 100 + k * 3, {}, color, {}};
      const double q = uniform(rng, spec.minQuality, 1.0);
      r.quality = q;
      r.vec = sample(mode.center, spec.baseNoise + spec.qualityNoise * (1.0 - q), rng);
      records.push_back(std::move(r));
    }
  }
  return Gallery(dimension, std::move(records));
}

Gallery makeBundleGallery(const std::string& make, const std::string& model, std::size_t bundles,
                          std::size_t perBundle, std::size_t dimension, double jitter,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EmbeddingRecord> records;
  for (std::size_t b = 0; b < bundles; ++b) {
    std::vector<double> axis(dimension, 0.0);
    axis[b % dimension] = 1.0;
    for (std::size_t i = 0; i < perBundle; ++i) {
      EmbeddingRecord r{fmt::format("{}-b{}-{:03}", model, b, i), make, model, {}, {}, {}, {}, {}};
      r.vec = sample(axis, jitter, rng);
      records.push_back(std::move(r));
    }
  }
  return Gallery(dimension, std::move(records));
}

}  // namespace reident::synthetic
