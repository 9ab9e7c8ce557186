// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded synthetic galleries standing in for real embedding exports: classes
// made of several separated modes (release years / views), imbalanced class
// priors, and video tracks whose low-quality detections are noisier.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reident/embedding.hpp"

namespace reident::synthetic {

struct ModeCenter {
  std::string make;
  std::string model;
  std::vector<double> center;  // unit length
};

struct MultiModeSpec {
  std::size_t makes = 3;
  std::size_t modelsPerMake = 2;
  std::size_t modesPerModel = 2;
  std::size_t trainPerMode = 40;
  std::size_t testPerMode = 20;
  std::size_t dimension = 16;
  double noise = 0.15;          // expected norm of the per-sample perturbation
  double maxModeCosine = 0.2;   // bound on |cos| between modes of one model
  std::size_t exactDuplicates = 0;   // extra verbatim copies injected into train
  std::size_t lowQualityRecords = 0; // extra noisy quality<0.2 records in train
};

struct MultiModeFixture {
  std::vector<ModeCenter> modes;
  Gallery train;
  Gallery test;
};

MultiModeFixture makeMultiModeFixture(const MultiModeSpec& spec, std::uint64_t seed);

struct PriorSpec {
  std::size_t dimension = 8;
  std::size_t trainCount = 1000;
  double majorityFraction = 0.9;
  std::size_t testPerClass = 500;
  double halfAngle = 0.35;  // radians between each class mean and the shared axis
  double noise = 0.35;
};

struct PriorFixture {
  Gallery train;  // imbalanced
  Gallery test;   // balanced
};

/// Two classes with mirror-symmetric class-conditional distributions.
PriorFixture makePriorFixture(const PriorSpec& spec, std::uint64_t seed);

struct TrackSpec {
  std::size_t tracks = 60;
  std::size_t detectionsPerTrack = 6;
  double baseNoise = 0.15;
  double qualityNoise = 1.2;  // added noise at quality 0, fading linearly to 0 at quality 1
  double minQuality = 0.05;
};

/// Video gallery: each track follows one mode of `modes`; detection noise
/// grows as quality drops. Tracks carry a color drawn from a small palette.
Gallery makeTrackGallery(const std::vector<ModeCenter>& modes, const TrackSpec& spec,
                         std::size_t dimension, std::uint64_t seed);

/// One make/model made of `bundles` tight bundles along orthogonal axes.
Gallery makeBundleGallery(const std::string& make, const std::string& model, std::size_t bundles,
                          std::size_t perBundle, std::size_t dimension, double jitter,
                          std::uint64_t seed);

}  // namespace reident::synthetic
