// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <json.hpp>

#include "lol/container.hpp"
#include "lol/errors.hpp"
#include "lol/featurizers.hpp"

namespace lol {

FeatureTable make_feature_table(std::span<const FeatureVector> features, std::size_t target_rank) {
  FeatureTable t;
  t.target_rank = target_rank;
  if (features.empty()) return t;
  t.method = features.front().method;
  t.offsets = features.front().offsets;
  const std::size_t dim = features.front().values.size();
  t.rows = Matrix(features.size(), dim);
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].values.size() != dim || features[k].offsets != t.offsets)
      throw ShapeError("make_feature_table: feature " + std::to_string(k) + " has a different layout");
    std::copy(features[k].values.begin(), features[k].values.end(), t.rows.row(k).begin());
  }
  return t;
}

std::vector<std::uint8_t> encode_lolf(const FeatureTable& table) {
  ByteWriter w;
  w.magic("LOLF");
  w.u32(kLolfVersion);
  w.u32(static_cast<std::uint32_t>(table.rows.rows()));
  w.u32(static_cast<std::uint32_t>(table.rows.cols()));
  for (double v : table.rows.data()) w.f32(v);
  return w.take();
}

Matrix decode_lolf(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LOLF");
  const auto version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kLolfVersion)
    throw ParseError(ParseError::Kind::version_mismatch, version_at,
                     "version mismatch: file has " + std::to_string(version));
  const auto shape_at = r.offset();
  const std::uint64_t count = r.u32("count");
  const std::uint64_t dim = r.u32("dim");
  if (count * dim > kMaxTensorElements)
    throw ParseError(ParseError::Kind::shape_overflow, shape_at, "shape overflow: " + std::to_string(count) + "x" +
                                                                     std::to_string(dim));
  if (count * dim * 4 > r.remaining())
    throw ParseError(ParseError::Kind::truncated, r.offset(), "truncated payload: feature rows");
  std::vector<double> data(count * dim);
  for (double& v : data) v = r.f32("feature");
  return Matrix(count, dim, std::move(data));
}

void save_features(const FeatureTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, encode_lolf(table));
  nlohmann::ordered_json layout = {{"method", to_string(table.method)},
                                   {"count", table.rows.rows()},
                                   {"dim", table.rows.cols()},
                                   {"offsets", table.offsets},
                                   {"target_rank", table.target_rank}};
  auto sidecar = path;
  sidecar += ".json";
  write_file_atomic(sidecar, layout.dump(1) + "\n");
}

FeatureTable load_features(const std::filesystem::path& path) {
  FeatureTable t;
  t.rows = decode_lolf(read_file(path));
  auto sidecar = path;
  sidecar += ".json";
  const auto bytes = read_file(sidecar);
  const auto layout = nlohmann::json::parse(bytes.begin(), bytes.end());
  t.method = parse_feature_method(layout.at("method").get<std::string>());
  t.offsets = layout.at("offsets").get<std::vector<std::size_t>>();
  t.target_rank = layout.value("target_rank", std::size_t{0});
  if (!t.offsets.empty() && t.offsets.back() != t.rows.cols())
    throw ShapeError("load_features: layout total does not match row width");
  return t;
}

}  // namespace lol
