// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/labels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>

#include "reident/error.hpp"

namespace reident {

std::string refinedModelName(std::string_view model, std::size_t cluster) {
  return fmt::format("{}#{}", model, cluster);
}

ModelName parseModelName(std::string_view model) {
  const auto hash = model.rfind('#');
  if (hash != std::string_view::npos && hash + 1 < model.size()) {
    const auto digits = model.substr(hash + 1);
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      return {std::string(model.substr(0, hash)), k};
    }
  }
  return {std::string(model), std::nullopt};
}

std::string classLabel(std::string_view make, std::string_view model) {
  if (make.find('/') != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("make '{}' must not contain '/'", make));
  }
  return fmt::format("{}/{}", make, model);
}

ClassLabel parseClassLabel(std::string_view label) {
  const auto slash = label.find('/');
  ClassLabel out;
  if (slash == std::string_view::npos) {
    out.make = std::string(label);
  } else {
    out.make = std::string(label.substr(0, slash));
    out.model = std::string(label.substr(slash + 1));
  }
  out.modelName = parseModelName(out.model);
  return out;
}

bool equalsIgnoreCase(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

}  // namespace reident
