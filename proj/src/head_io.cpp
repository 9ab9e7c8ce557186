// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// EHED head file:
//   "EHED" | u32 version=1 | u32 header length | JSON header |
//   C*D f32 centroids (row-major) | C f32 bias (biased heads only)
// All integers and floats little-endian.

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "reident/head.hpp"

namespace reident {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'H', 'E', 'D'};
constexpr std::uint32_t kVersion = 1;

[[noreturn]] void formatFail(const std::string& what) {
  throw Error(ErrorCode::kParseError, fmt::format("head file: {}", what));
}

}  // namespace

void saveHead(const HeadModel& model, const std::filesystem::path& path) {
  model.validate();
  nlohmann::ordered_json header;
  header["labels"] = model.labels;
  header["dimension"] = model.dimension;
  header["classes"] = model.classCount();
  header["variant"] = variantName(model.variant);
  header["seed"] = model.seed;
  header["has_bias"] = model.bias.has_value();
  const std::string headerText = header.dump();

  std::ostringstream buffer(std::ios::binary | std::ios::out);
  io::Writer w(buffer);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(headerText.size()));
  w.bytes(headerText.data(), headerText.size());
  for (double v : model.centroids) w.f32(static_cast<float>(v));
  if (model.bias) {
    for (double v : *model.bias) w.f32(static_cast<float>(v));
  }
  io::writeFile(path, buffer.str());
}

HeadModel loadHead(const std::filesystem::path& path) {
  std::istringstream in(io::readFile(path), std::ios::binary | std::ios::in);
  io::Reader rd(in);
  std::array<char, 4> magic{};
  rd.bytes(magic.data(), magic.size());
  if (magic != kMagic) formatFail("bad magic, expected EHED");
  if (const auto v = rd.u32(); v != kVersion) formatFail(fmt::format("unsupported version {}", v));
  std::string headerText(rd.u32(), '\0');
  rd.bytes(headerText.data(), headerText.size());

  HeadModel m;
  std::size_t classes = 0;
  bool hasBias = false;
  try {
    const auto header = nlohmann::json::parse(headerText);
    m.labels = header.at("labels").get<std::vector<std::string>>();
    m.dimension = header.at("dimension").get<std::size_t>();
    classes = header.at("classes").get<std::size_t>();
    m.variant = parseVariant(header.at("variant").get<std::string>());
    m.seed = header.at("seed").get<std::uint64_t>();
    hasBias = header.at("has_bias").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    formatFail(fmt::format("bad header: {}", e.what()));
  }
  if (classes != m.labels.size()) formatFail("class count disagrees with label list");
  m.centroids.resize(classes * m.dimension);
  for (double& v : m.centroids) v = rd.f32();
  if (hasBias) {
    m.bias = std::vector<double>(classes);
    for (double& v : *m.bias) v = rd.f32();
  }
  if (in.peek() != std::char_traits<char>::eof()) formatFail("trailing bytes");
  if (m.variant == HeadVariant::kPriorFree) {
    // Rows were unit length before rounding to f32; restore the exact invariant.
    for (std::size_t k = 0; k < m.classCount(); ++k) {
      auto row = m.centroid(k);
      double n = 0.0;
      for (double v : row) n += v * v;
      n = std::sqrt(n);
      if (n == 0.0) formatFail("zero centroid in prior-free head");
      for (double& v : row) v /= n;
    }
  }
  m.validate();
  return m;
}

}  // namespace reident
