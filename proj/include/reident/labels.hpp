// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// Label conventions shared across modules.
//
//   refined model name:  "<model>#<k>"       (cluster k of <model>)
//   class label:         "<make>/<model>"    (head classes; make has no '/')

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace reident {

struct ModelName {
  std::string base;
  std::optional<std::size_t> cluster;
};

std::string refinedModelName(std::string_view model, std::size_t cluster);

/// Splits a trailing "#<digits>" cluster suffix off a model name.
ModelName parseModelName(std::string_view model);

struct ClassLabel {
  std::string make;
  std::string model;  // as stored, possibly refined
  ModelName modelName;
};

/// "<make>/<model>". Throws InvalidArgument when make contains '/'.
std::string classLabel(std::string_view make, std::string_view model);

ClassLabel parseClassLabel(std::string_view label);

/// Case-insensitive ASCII comparison.
bool equalsIgnoreCase(std::string_view a, std::string_view b);

}  // namespace reident
