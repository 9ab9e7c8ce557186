// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/head.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "reident/labels.hpp"

namespace reident {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kInitStddev = 0.01;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalizeInPlace(std::span<double> v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw Error(ErrorCode::kZeroNormVector, "cannot normalize a zero-norm centroid");
  for (double& x : v) x /= n;
}

void normalizeRows(HeadModel& m) {
  for (std::size_t k = 0; k < m.classCount(); ++k) normalizeInPlace(m.centroid(k));
}

std::vector<double> toDouble(std::span<const float> x) { return {x.begin(), x.end()}; }

std::vector<double> unitInput(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw Error(ErrorCode::kZeroNormVector, "prior-free head needs a nonzero input");
  for (double& e : v) e /= n;
  return v;
}

// Logits as used by the loss: prior-free rows are taken as stored (the
// training loop keeps them on the unit sphere) and scaled by the softmax
// temperature.
std::vector<double> lossLogits(const HeadModel& m, std::span<const double> x, double scale) {
  std::vector<double> z(m.classCount());
  if (m.variant == HeadVariant::kPriorFree) {
    const auto xhat = unitInput(x);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = scale * dot(m.centroid(k), xhat);
  } else {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(m.centroid(k), x) + (*m.bias)[k];
  }
  return z;
}

// In-place softmax; returns log-sum-exp.
double softmax(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return mx + std::log(sum);
}

double lossOnly(const HeadModel& m, std::span<const Example> batch, const TrainConfig& cfg) {
  double loss = 0.0;
  for (const auto& ex : batch) {
    auto z = lossLogits(m, ex.x, cfg.logitScale);
    const double target = z[ex.target];
    loss += softmax(z) - target;
  }
  loss /= static_cast<double>(batch.size());
  if (m.variant == HeadVariant::kBiased) loss += 0.5 * cfg.l2 * dot(m.centroids, m.centroids);
  return loss;
}

std::uint64_t uniformBelow(std::mt19937_64& rng, std::uint64_t n) {
  // 2^64 mod n low draws are rejected so the remaining range divides evenly.
  const std::uint64_t reject = (std::numeric_limits<std::uint64_t>::max() - n + 1) % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r < reject);
  return r % n;
}

void freshRow(std::span<double> row, std::mt19937_64& rng, HeadVariant variant) {
  std::normal_distribution<double> normal(0.0, kInitStddev);
  for (double& v : row) v = normal(rng);
  if (variant == HeadVariant::kPriorFree) normalizeInPlace(row);
}

}  // namespace

std::string_view variantName(HeadVariant variant) {
  return variant == HeadVariant::kBiased ? "biased" : "prior-free";
}

HeadVariant parseVariant(std::string_view name) {
  if (name == "biased") return HeadVariant::kBiased;
  if (name == "prior-free") return HeadVariant::kPriorFree;
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown head variant '{}' (expected biased or prior-free)", name));
}

std::optional<std::size_t> HeadModel::labelIndex(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

void HeadModel::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (labels.empty()) fail("head has no classes");
  if (dimension == 0) fail("head dimension must be positive");
  if (centroids.size() != labels.size() * dimension) fail("centroid matrix has the wrong shape");
  std::unordered_set<std::string_view> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) fail(fmt::format("duplicate class label '{}'", l));
  }
  if (variant == HeadVariant::kPriorFree) {
    if (bias) fail("prior-free head must not carry a bias");
    for (std::size_t k = 0; k < classCount(); ++k) {
      const double n = std::sqrt(dot(centroid(k), centroid(k)));
      if (std::abs(n - 1.0) > kUnitTolerance) {
        fail(fmt::format("prior-free centroid {} has norm {}", labels[k], n));
      }
    }
  } else {
    if (!bias) fail("biased head requires a bias vector");
    if (bias->size() != labels.size()) fail("bias length differs from class count");
  }
}

void TrainConfig::validate() const {
  if (!(learningRate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  if (batchSize == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be > 0");
  if (!(l2 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "l2 must be >= 0");
  if (!(logitScale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "logit scale must be > 0");
}

std::vector<double> logits(const HeadModel& model, std::span<const float> x) {
  detail::checkSameDimension(x.size(), model.dimension);
  const auto xd = toDouble(x);
  std::vector<double> z(model.classCount());
  if (model.variant == HeadVariant::kPriorFree) {
    const auto xhat = unitInput(xd);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const auto row = model.centroid(k);
      const double n = std::sqrt(dot(row, row));
      z[k] = std::clamp(dot(row, xhat) / n, -1.0, 1.0);
    }
  } else {
    for (std::size_t k = 0; k < z.size(); ++k) {
      z[k] = dot(model.centroid(k), xd) + (*model.bias)[k];
    }
  }
  return z;
}

Prediction predict(const HeadModel& model, std::span<const float> x) {
  auto z = logits(model, x);
  const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  Prediction p;
  p.classIndex = best;
  p.label = model.labels[best];
  if (model.variant == HeadVariant::kPriorFree) {
    p.score = detail::scoreFromCosine(z[best]);
  } else {
    softmax(z);
    p.score = z[best];
  }
  return p;
}

LossGradient lossAndGradient(const HeadModel& model, std::span<const Example> batch,
                             const TrainConfig& config) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  const std::size_t C = model.classCount();
  const std::size_t D = model.dimension;
  const bool priorFree = model.variant == HeadVariant::kPriorFree;
  LossGradient out;
  out.centroids.assign(C * D, 0.0);
  if (!priorFree) out.bias.assign(C, 0.0);
  const double invN = 1.0 / static_cast<double>(batch.size());

  for (const auto& ex : batch) {
    std::vector<double> xin;
    std::span<const double> x = ex.x;
    if (priorFree) {
      xin = unitInput(ex.x);
      x = xin;
    }
    auto p = lossLogits(model, ex.x, config.logitScale);
    const double target = p[ex.target];
    out.loss += softmax(p) - target;
    p[ex.target] -= 1.0;
    const double factor = priorFree ? config.logitScale * invN : invN;
    for (std::size_t k = 0; k < C; ++k) {
      const double g = p[k] * factor;
      double* row = out.centroids.data() + k * D;
      for (std::size_t d = 0; d < D; ++d) row[d] += g * x[d];
      if (!priorFree) out.bias[k] += p[k] * invN;
    }
  }
  out.loss *= invN;

  if (priorFree) {
    for (std::size_t k = 0; k < C; ++k) {
      const auto w = model.centroid(k);
      std::span<double> g(out.centroids.data() + k * D, D);
      const double radial = dot(g, w);
      for (std::size_t d = 0; d < D; ++d) g[d] -= radial * w[d];
    }
  } else if (config.l2 > 0.0) {
    out.loss += 0.5 * config.l2 * dot(model.centroids, model.centroids);
    for (std::size_t i = 0; i < out.centroids.size(); ++i) {
      out.centroids[i] += config.l2 * model.centroids[i];
    }
  }
  return out;
}

double gradientCheck(const HeadModel& model, std::span<const Example> batch,
                     const TrainConfig& config) {
  const auto analytic = lossAndGradient(model, batch, config);
  const bool priorFree = model.variant == HeadVariant::kPriorFree;
  double worst = 0.0;
  auto relErr = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
  };

  HeadModel probe = model;
  for (std::size_t k = 0; k < model.classCount(); ++k) {
    for (std::size_t d = 0; d < model.dimension; ++d) {
      const double w = model.centroid(k)[d];
      const double h = 1e-5 * std::max(1.0, std::abs(w));
      auto lossAt = [&](double delta) {
        auto row = probe.centroid(k);
        std::copy(model.centroid(k).begin(), model.centroid(k).end(), row.begin());
        row[d] += delta;
        if (priorFree) normalizeInPlace(row);
        return lossOnly(probe, batch, config);
      };
      const double numeric = (lossAt(h) - lossAt(-h)) / (2.0 * h);
      auto row = probe.centroid(k);
      std::copy(model.centroid(k).begin(), model.centroid(k).end(), row.begin());
      worst = std::max(worst, relErr(analytic.centroids[k * model.dimension + d], numeric));
    }
  }
  if (!priorFree) {
    for (std::size_t k = 0; k < model.classCount(); ++k) {
      const double b = (*model.bias)[k];
      const double h = 1e-5 * std::max(1.0, std::abs(b));
      (*probe.bias)[k] = b + h;
      const double up = lossOnly(probe, batch, config);
      (*probe.bias)[k] = b - h;
      const double down = lossOnly(probe, batch, config);
      (*probe.bias)[k] = b;
      worst = std::max(worst, relErr(analytic.bias[k], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

HeadModel initHead(std::vector<std::string> labels, std::size_t dimension, HeadVariant variant,
                   std::uint64_t seed) {
  HeadModel m;
  m.labels = std::move(labels);
  m.dimension = dimension;
  m.variant = variant;
  m.seed = seed;
  m.centroids.assign(m.labels.size() * dimension, 0.0);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < m.classCount(); ++k) freshRow(m.centroid(k), rng, variant);
  if (variant == HeadVariant::kBiased) m.bias = std::vector<double>(m.labels.size(), 0.0);
  m.validate();
  return m;
}

std::vector<std::string> galleryClassLabels(const Gallery& gallery) {
  std::set<std::string> labels;
  for (const auto& r : gallery.records()) labels.insert(classLabel(r.make, r.model));
  return {labels.begin(), labels.end()};
}

HeadModel trainHead(const Gallery& gallery, HeadVariant variant, const TrainConfig& config,
                    const HeadModel* init, const TrainObserver& observer) {
  config.validate();
  HeadModel model;
  if (init) {
    if (init->variant != variant) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("warm-start head is {}, requested {}", variantName(init->variant),
                              variantName(variant)));
    }
    if (init->dimension != gallery.dimension()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("warm-start head dimension {} differs from gallery dimension {}",
                              init->dimension, gallery.dimension()));
    }
    model = *init;
    if (variant == HeadVariant::kPriorFree) normalizeRows(model);
  } else {
    model = initHead(galleryClassLabels(gallery), gallery.dimension(), variant, config.seed);
  }
  if (model.classCount() < 2) {
    throw Error(ErrorCode::kSingleClass, "training a head needs at least two classes");
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < model.classCount(); ++k) index.emplace(model.labels[k], k);
  const std::size_t D = gallery.dimension();
  std::vector<double> inputs(gallery.size() * D);
  std::vector<std::size_t> targets(gallery.size());
  std::vector<std::size_t> perClass(model.classCount(), 0);
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const auto& r = gallery[i];
    auto it = index.find(classLabel(r.make, r.model));
    if (it == index.end()) {
      throw Error(ErrorCode::kUnknownLabel,
                  fmt::format("record '{}' has label {}/{} unknown to the head", r.id, r.make,
                              r.model));
    }
    targets[i] = it->second;
    ++perClass[it->second];
    std::copy(r.vec.begin(), r.vec.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * D));
  }
  for (std::size_t k = 0; k < perClass.size(); ++k) {
    if (perClass[k] == 0) {
      throw Error(ErrorCode::kEmptyClass,
                  fmt::format("class '{}' has no training samples", model.labels[k]));
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(gallery.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Example> batch;
  batch.reserve(config.batchSize);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniformBelow(rng, i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batchSize) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + config.batchSize);
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t i = order[j];
        batch.push_back({std::span<const double>(inputs.data() + i * D, D), targets[i]});
      }
      const auto grad = lossAndGradient(model, batch, config);
      for (std::size_t e = 0; e < model.centroids.size(); ++e) {
        model.centroids[e] -= config.learningRate * grad.centroids[e];
      }
      if (model.bias) {
        for (std::size_t k = 0; k < model.classCount(); ++k) {
          (*model.bias)[k] -= config.learningRate * grad.bias[k];
        }
      }
      if (variant == HeadVariant::kPriorFree) normalizeRows(model);
    }
    if (observer) observer(epoch, model);
  }
  model.seed = init ? init->seed : config.seed;
  model.validate();
  return model;
}

HeadModel reinitClassificationLayer(const HeadModel& old, std::span<const std::string> newLabels,
                                    std::optional<std::uint64_t> seed) {
  if (newLabels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "new classification layer needs at least one label");
  }
  HeadModel m;
  m.labels.assign(newLabels.begin(), newLabels.end());
  m.dimension = old.dimension;
  m.variant = old.variant;
  m.seed = seed.value_or(old.seed);
  m.centroids.assign(m.labels.size() * m.dimension, 0.0);
  if (m.variant == HeadVariant::kBiased) m.bias = std::vector<double>(m.labels.size(), 0.0);

  std::mt19937_64 rng(m.seed);
  for (std::size_t k = 0; k < m.classCount(); ++k) {
    if (auto from = old.labelIndex(m.labels[k])) {
      std::copy(old.centroid(*from).begin(), old.centroid(*from).end(), m.centroid(k).begin());
      if (m.bias) (*m.bias)[k] = (*old.bias)[*from];
    } else {
      freshRow(m.centroid(k), rng, m.variant);
    }
  }
  m.validate();
  return m;
}

}  // namespace reident
