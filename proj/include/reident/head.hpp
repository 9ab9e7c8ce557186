// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Linear classification head over fixed embeddings.
//
// Two variants share the centroid matrix W (one row per class):
//   biased      logits = W x + b
//   prior-free  logits = cos(w_k, x) for every class k; no bias, rows of W
//               kept on the unit sphere ("hard normalization")
// A prior-free head cannot encode class frequencies of its training data,
// which is the point of the variant.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reident/embedding.hpp"

namespace reident {

enum class HeadVariant { kBiased, kPriorFree };

std::string_view variantName(HeadVariant variant);
HeadVariant parseVariant(std::string_view name);

struct HeadModel {
  std::vector<std::string> labels;
  std::size_t dimension = 0;
  std::vector<double> centroids;  // labels.size() x dimension, row-major
  std::optional<std::vector<double>> bias;
  HeadVariant variant = HeadVariant::kPriorFree;
  std::uint64_t seed = 0;

  std::size_t classCount() const { return labels.size(); }
  std::span<const double> centroid(std::size_t k) const {
    return {centroids.data() + k * dimension, dimension};
  }
  std::span<double> centroid(std::size_t k) { return {centroids.data() + k * dimension, dimension}; }
  std::optional<std::size_t> labelIndex(std::string_view label) const;

  /// Throws InvalidArgument when a HeadModel invariant does not hold.
  void validate() const;

  bool operator==(const HeadModel&) const = default;
};

struct TrainConfig {
  double learningRate = 0.1;
  std::size_t epochs = 30;
  std::size_t batchSize = 32;
  double l2 = 0.0;
  std::uint64_t seed = 7;
  // Softmax temperature applied to the cosine logits of a prior-free head
  // while training. Inference scores stay raw cosines.
  double logitScale = 10.0;

  void validate() const;
};

std::vector<double> logits(const HeadModel& model, std::span<const float> x);

struct Prediction {
  std::size_t classIndex = 0;
  std::string label;
  double score = 0.0;
};

/// Rank-1 class; ties go to the lowest class index. The score is the softmax
/// probability of the winner (biased) or its cosine mapped to [0,1]
/// (prior-free), i.e. the same axis as matchScore.
Prediction predict(const HeadModel& model, std::span<const float> x);

struct Example {
  std::span<const double> x;
  std::size_t target = 0;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> centroids;
  std::vector<double> bias;  // empty for prior-free
};

/// Mean softmax cross-entropy over `batch` plus l2/2 |W|^2 (biased only), and
/// its gradient. For prior-free heads the centroid gradient is projected
/// onto the tangent space of each unit row.
LossGradient lossAndGradient(const HeadModel& model, std::span<const Example> batch,
                             const TrainConfig& config);

/// Max relative error between lossAndGradient and central finite differences.
/// Prior-free rows are perturbed on the sphere: w -> normalize(w + h e_i).
/// Relative error is |a - n| / max(|a|, |n|, 1e-3).
double gradientCheck(const HeadModel& model, std::span<const Example> batch,
                     const TrainConfig& config = {});

/// Seeded small-variance random rows (unit norm when prior-free), zero bias.
HeadModel initHead(std::vector<std::string> labels, std::size_t dimension, HeadVariant variant,
                   std::uint64_t seed);

using TrainObserver = std::function<void(std::size_t epoch, const HeadModel&)>;

/// Mini-batch gradient descent on softmax cross-entropy, classes named by
/// classLabel(make, model). With `init` the class set and starting weights
/// come from it; otherwise classes are the sorted distinct gallery labels.
HeadModel trainHead(const Gallery& gallery, HeadVariant variant, const TrainConfig& config,
                    const HeadModel* init = nullptr, const TrainObserver& observer = {});

/// New classification layer for `newLabels`: rows of labels already present
/// in `old` are copied, the rest freshly initialized. Variant is preserved.
HeadModel reinitClassificationLayer(const HeadModel& old, std::span<const std::string> newLabels,
                                    std::optional<std::uint64_t> seed = std::nullopt);

/// Class labels present in a gallery, sorted.
std::vector<std::string> galleryClassLabels(const Gallery& gallery);

void saveHead(const HeadModel& model, const std::filesystem::path& path);
HeadModel loadHead(const std::filesystem::path& path);

}  // namespace reident
