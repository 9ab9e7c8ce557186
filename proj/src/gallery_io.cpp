// Copyright 2026 The reident Authors
// SPDX-License-Identifier: Apache-2.0

// JSONL and EGAL binary gallery formats.

#include <fmt/format.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "json.hpp"
#include "reident/embedding.hpp"

namespace reident {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<char, 4> kMagic = {'E', 'G', 'A', 'L'};
constexpr std::uint32_t kVersion = 1;

enum Flags : std::uint8_t {
  kHasTrack = 1u << 0,
  kHasFrame = 1u << 1,
  kHasQuality = 1u << 2,
  kHasColor = 1u << 3,
};

[[noreturn]] void parseFail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError, fmt::format("line {}: {}", line, what));
}

const json& requireField(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) parseFail(line, fmt::format("missing field '{}'", key));
  return *it;
}

std::string requireString(const json& obj, const char* key, std::size_t line) {
  const json& v = requireField(obj, key, line);
  if (!v.is_string()) parseFail(line, fmt::format("field '{}' must be a string", key));
  return v.get<std::string>();
}

double requireNumber(const json& v, const char* key, std::size_t line) {
  if (!v.is_number()) parseFail(line, fmt::format("field '{}' must be a number", key));
  return v.get<double>();
}

EmbeddingRecord recordFromJson(const json& obj, std::size_t line) {
  if (!obj.is_object()) parseFail(line, "record must be a JSON object");
  EmbeddingRecord r;
  r.id = requireString(obj, "id", line);
  r.make = requireString(obj, "make", line);
  r.model = requireString(obj, "model", line);
  if (auto it = obj.find("track_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) parseFail(line, "field 'track_id' must be a string");
    r.trackId = it->get<std::string>();
  }
  if (auto it = obj.find("frame"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) parseFail(line, "field 'frame' must be a non-negative integer");
    r.frame = it->get<std::uint64_t>();
  }
  if (auto it = obj.find("quality"); it != obj.end() && !it->is_null()) {
    r.quality = requireNumber(*it, "quality", line);
  }
  if (auto it = obj.find("color"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) parseFail(line, "field 'color' must be an object");
    r.color = Color{requireString(*it, "name", line),
                    requireNumber(requireField(*it, "score", line), "color.score", line)};
  }
  const json& vec = requireField(obj, "vec", line);
  if (!vec.is_array()) parseFail(line, "field 'vec' must be an array");
  r.vec.reserve(vec.size());
  for (const json& v : vec) {
    const double d = requireNumber(v, "vec", line);
    if (std::abs(d) > std::numeric_limits<float>::max()) {
      parseFail(line, "vector entry out of 32-bit float range");
    }
    r.vec.push_back(static_cast<float>(d));
  }
  return r;
}

ordered_json recordToJson(const EmbeddingRecord& r) {
  ordered_json obj;
  obj["id"] = r.id;
  obj["make"] = r.make;
  obj["model"] = r.model;
  if (r.trackId) obj["track_id"] = *r.trackId;
  if (r.frame) obj["frame"] = *r.frame;
  if (r.quality) obj["quality"] = *r.quality;
  if (r.color) obj["color"] = ordered_json{{"name", r.color->name}, {"score", r.color->score}};
  obj["vec"] = r.vec;
  return obj;
}

// Collects records then validates them as a Gallery, re-raising invariant
// violations with the offending line attached.
Gallery assemble(std::vector<EmbeddingRecord> records, const std::vector<std::size_t>& lines,
                 std::size_t dimension, const char* unit) {
  if (records.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery file contains no records");
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen.insert(records[i].id).second) {
      throw Error(ErrorCode::kDuplicateId,
                  fmt::format("{} {}: duplicate record id '{}'", unit, lines[i], records[i].id));
    }
    if (records[i].vec.size() != dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("{} {}: record '{}' has dimension {}, expected {}", unit, lines[i],
                              records[i].id, records[i].vec.size(), dimension));
    }
  }
  return Gallery(dimension, std::move(records));
}

Gallery readJsonl(std::istream& in) {
  std::vector<EmbeddingRecord> records;
  std::vector<std::size_t> lines;
  std::string text;
  std::size_t lineNo = 0;
  while (std::getline(in, text)) {
    ++lineNo;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      parseFail(lineNo, e.what());
    }
    records.push_back(recordFromJson(obj, lineNo));
    lines.push_back(lineNo);
  }
  const std::size_t dimension = records.empty() ? 0 : records.front().vec.size();
  if (!records.empty() && dimension == 0) parseFail(lines.front(), "empty vector");
  return assemble(std::move(records), lines, dimension, "line");
}

void writeJsonl(const Gallery& g, std::ostream& out) {
  for (const auto& r : g.records()) out << recordToJson(r).dump() << '\n';
}

Gallery readBinary(std::istream& in) {
  io::Reader rd(in);
  std::array<char, 4> magic{};
  rd.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw Error(ErrorCode::kParseError, "offset 0: bad magic, expected EGAL");
  const auto version = rd.u32();
  if (version != kVersion) {
    throw Error(ErrorCode::kParseError, fmt::format("offset 4: unsupported version {}", version));
  }
  const std::uint32_t dimension = rd.u32();
  const std::uint64_t count = rd.u64();
  if (dimension == 0) throw Error(ErrorCode::kParseError, "offset 8: dimension is zero");
  std::vector<EmbeddingRecord> records;
  std::vector<std::size_t> offsets;
  for (std::uint64_t i = 0; i < count; ++i) {
    offsets.push_back(rd.offset());
    EmbeddingRecord r;
    r.id = rd.str16();
    r.make = rd.str16();
    r.model = rd.str16();
    const std::uint8_t flags = rd.u8();
    if (flags & ~(kHasTrack | kHasFrame | kHasQuality | kHasColor)) {
      throw Error(ErrorCode::kParseError,
                  fmt::format("offset {}: unknown flag bits {:#x}", rd.offset() - 1, flags));
    }
    if (flags & kHasTrack) r.trackId = rd.str16();
    if (flags & kHasFrame) r.frame = rd.u64();
    if (flags & kHasQuality) r.quality = rd.f64();
    if (flags & kHasColor) {
      Color c;
      c.name = rd.str16();
      c.score = rd.f64();
      r.color = std::move(c);
    }
    r.vec.resize(dimension);
    for (auto& v : r.vec) v = rd.f32();
    records.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kParseError,
                fmt::format("offset {}: trailing bytes after last record", rd.offset()));
  }
  return assemble(std::move(records), offsets, dimension, "offset");
}

void writeBinary(const Gallery& g, std::ostream& out) {
  io::Writer w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  if (g.dimension() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "dimension exceeds u32");
  }
  w.u32(static_cast<std::uint32_t>(g.dimension()));
  w.u64(g.size());
  for (const auto& r : g.records()) {
    w.str16(r.id);
    w.str16(r.make);
    w.str16(r.model);
    std::uint8_t flags = 0;
    if (r.trackId) flags |= kHasTrack;
    if (r.frame) flags |= kHasFrame;
    if (r.quality) flags |= kHasQuality;
    if (r.color) flags |= kHasColor;
    w.u8(flags);
    if (r.trackId) w.str16(*r.trackId);
    if (r.frame) w.u64(*r.frame);
    if (r.quality) w.f64(*r.quality);
    if (r.color) {
      w.str16(r.color->name);
      w.f64(r.color->score);
    }
    for (float v : r.vec) w.f32(v);
  }
}

}  // namespace

Gallery loadGallery(const std::filesystem::path& path, GalleryFormat format) {
  std::ifstream in(path, format == GalleryFormat::kBinary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open '{}'", path.string()));
  return format == GalleryFormat::kBinary ? readBinary(in) : readJsonl(in);
}

void saveGallery(const Gallery& gallery, const std::filesystem::path& path, GalleryFormat format) {
  std::ostringstream buffer(format == GalleryFormat::kBinary ? std::ios::binary | std::ios::out
                                                             : std::ios::out);
  if (format == GalleryFormat::kBinary) {
    writeBinary(gallery, buffer);
  } else {
    writeJsonl(gallery, buffer);
  }
  io::writeFile(path, buffer.str());
}

}  // namespace reident
