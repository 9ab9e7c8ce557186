// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "reident/embedding.hpp"
#include "reident/error.hpp"

namespace reident::testing {

inline EmbeddingRecord rec(std::string id, std::vector<float> vec, std::string make = "VW",
                           std::string model = "Golf") {
  EmbeddingRecord r;
  r.id = std::move(id);
  r.make = std::move(make);
  r.model = std::move(model);
  r.vec = std::move(vec);
  return r;
}

inline Gallery gallery(std::vector<EmbeddingRecord> records) {
  const std::size_t d = records.empty() ? 0 : records.front().vec.size();
  return Gallery(d, std::move(records));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path tempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("reident-unit-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

/// Code of the reident::Error thrown by `fn`, if any.
inline std::optional<ErrorCode> codeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace reident::testing
