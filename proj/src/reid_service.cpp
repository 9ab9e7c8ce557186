// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

#include "reident/reid_service.hpp"

#include <charconv>
#include <cmath>

#include "httplib.h"
#include "json.hpp"

namespace reident {

IndexStore::IndexStore(std::shared_ptr<const ReidIndex> initial) : current_(std::move(initial)) {}

std::shared_ptr<const ReidIndex> IndexStore::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

void IndexStore::replace(std::shared_ptr<const ReidIndex> next) {
  std::lock_guard lock(mu_);
  current_.swap(next);
}

namespace {

ApiResponse errorResponse(int status, std::string_view code, std::string_view message) {
  nlohmann::ordered_json body{{"code", code}, {"message", message}};
  return {status, body.dump()};
}

ApiResponse fromError(const Error& e) {
  int status = 500;
  if (e.code() == ErrorCode::kBadQuery) status = 400;
  if (e.code() == ErrorCode::kUnknownTrack) status = 404;
  return errorResponse(status, errorName(e.code()), e.what());
}

std::optional<std::string> param(const QueryParams& params, const char* key) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

template <typename T>
T parseNumber(const std::string& text, const char* key) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kBadQuery, std::string("malformed ") + key + " '" + text + "'");
  }
  return value;
}

}  // namespace

SearchQuery parseSearchQuery(const QueryParams& params) {
  SearchQuery q;
  q.make = param(params, "make");
  q.model = param(params, "model");
  q.color = param(params, "color");
  if (auto s = param(params, "min_score")) q.minScore = parseNumber<double>(*s, "min_score");
  if (auto s = param(params, "limit")) q.limit = parseNumber<std::size_t>(*s, "limit");
  return q;
}

ApiResponse handleSearch(const ReidIndex& index, const QueryParams& params,
                         double defaultMinScore) {
  try {
    return {200, search(index, parseSearchQuery(params), defaultMinScore).toJson().dump()};
  } catch (const Error& e) {
    return fromError(e);
  }
}

ApiResponse handleTrack(const ReidIndex& index, std::string_view trackId) {
  try {
    const auto& members = trackDetail(index, trackId);
    const IndexEntry* entry = index.find(trackId);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& m : members) {
      nlohmann::ordered_json row{{"id", m.id}};
      row["frame"] = m.frame ? nlohmann::ordered_json(*m.frame) : nlohmann::ordered_json();
      row["quality"] = m.quality;
      row["bestShot"] = m.id == entry->recordId;
      rows.push_back(std::move(row));
    }
    nlohmann::ordered_json body{{"trackId", entry->trackId},
                                {"bestShotRecordId", entry->recordId},
                                {"predictedMake", entry->predictedMake},
                                {"predictedModel", entry->predictedModel},
                                {"shapeScore", entry->shapeScore},
                                {"members", std::move(rows)}};
    return {200, body.dump()};
  } catch (const Error& e) {
    return fromError(e);
  }
}

ApiResponse handleMeta(const ReidIndex& index) { return {200, index.metaJson().dump()}; }

class ReidService::Impl {
 public:
  httplib::Server server;
};

ReidService::ReidService(ServiceConfig config)
    : config_(std::move(config)),
      store_(std::make_shared<const ReidIndex>(loadIndex(config_.indexPath))),
      impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  auto reply = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body, "application/json");
  };
  auto toParams = [](const httplib::Request& req) {
    QueryParams p;
    for (const auto& [k, v] : req.params) p.emplace(k, v);
    return p;
  };

  srv.Get("/api/search", [this, reply, toParams](const httplib::Request& req, httplib::Response& res) {
    const auto index = store_.snapshot();
    reply(res, handleSearch(*index, toParams(req), config_.defaultMinScore));
  });
  srv.Get(R"(/api/track/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    const auto index = store_.snapshot();
    reply(res, handleTrack(*index, req.matches[1].str()));
  });
  srv.Get("/api/meta", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, handleMeta(*store_.snapshot()));
  });
  srv.Post("/api/reload", [this, reply](const httplib::Request&, httplib::Response& res) {
    try {
      reload();
      reply(res, handleMeta(*store_.snapshot()));
    } catch (const Error& e) {
      reply(res, errorResponse(500, errorName(e.code()), e.what()));
    }
  });
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  if (config_.staticDir) srv.set_mount_point("/", config_.staticDir->string());
  srv.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const int status = res.status;
      reply(res, errorResponse(status, status == 404 ? "NotFound" : "HttpError",
                               httplib::status_message(status)));
    }
  });
}

ReidService::~ReidService() { stop(); }

int ReidService::bind() {
  auto& srv = impl_->server;
  if (config_.port == 0) {
    const int port = srv.bind_to_any_port(config_.host);
    if (port < 0) throw Error(ErrorCode::kIoError, "cannot bind " + config_.host);
    return port;
  }
  if (!srv.bind_to_port(config_.host, config_.port)) {
    throw Error(ErrorCode::kIoError,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void ReidService::serve() { impl_->server.listen_after_bind(); }

void ReidService::stop() {
  if (impl_) impl_->server.stop();
}

void ReidService::waitUntilReady() const { impl_->server.wait_until_ready(); }

void ReidService::reload() {
  store_.replace(std::make_shared<const ReidIndex>(loadIndex(config_.indexPath)));
}

}  // namespace reident
