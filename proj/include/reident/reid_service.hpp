// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP/JSON front end over a ReidIndex.
//
//   GET  /api/search?make=&model=&color=&min_score=&limit=
//   GET  /api/track/{id}
//   GET  /api/meta
//   POST /api/reload        re-read the index file, swap atomically
//
// Errors are {"code": ..., "message": ...} with 400 (BadQuery),
// 404 (UnknownTrack, unknown route) or 500.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "reident/reid_index.hpp"

namespace reident {

/// Holds the current index snapshot. Readers keep the snapshot they got
/// alive; a replacement never mutates an index a reader can see.
class IndexStore {
 public:
  explicit IndexStore(std::shared_ptr<const ReidIndex> initial);

  std::shared_ptr<const ReidIndex> snapshot() const;
  void replace(std::shared_ptr<const ReidIndex> next);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ReidIndex> current_;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

using QueryParams = std::multimap<std::string, std::string>;

/// Empty parameter values count as absent.
SearchQuery parseSearchQuery(const QueryParams& params);

ApiResponse handleSearch(const ReidIndex& index, const QueryParams& params,
                         double defaultMinScore);
ApiResponse handleTrack(const ReidIndex& index, std::string_view trackId);
ApiResponse handleMeta(const ReidIndex& index);

struct ServiceConfig {
  std::filesystem::path indexPath;
  std::string host = "127.0.0.1";
  int port = 8080;
  double defaultMinScore = 0.5;
  std::optional<std::filesystem::path> staticDir;
};

class ReidService {
 public:
  /// Loads the index; throws when it is missing or malformed.
  explicit ReidService(ServiceConfig config);
  ~ReidService();
  ReidService(const ReidService&) = delete;
  ReidService& operator=(const ReidService&) = delete;

  /// Binds to config.port (0 picks a free port) and returns the bound port.
  int bind();
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  void waitUntilReady() const;

  /// Re-reads the index file; on failure the current snapshot stays.
  void reload();

  IndexStore& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  class Impl;
  ServiceConfig config_;
  IndexStore store_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace reident
