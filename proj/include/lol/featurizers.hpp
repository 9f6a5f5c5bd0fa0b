// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lol/lora.hpp"

namespace lol {

enum class FeatureMethod { flatten, o_align, svd, dense };

std::string_view to_string(FeatureMethod method);
FeatureMethod parse_feature_method(std::string_view s);

/// Flat feature vector. `offsets` has one entry per layer plus a final total,
/// so layer i occupies [offsets[i], offsets[i+1]).
struct FeatureVector {
  std::vector<double> values;
  FeatureMethod method = FeatureMethod::flatten;
  std::vector<std::size_t> offsets;

  std::span<const double> segment(std::size_t layer) const {
    return std::span(values).subspan(offsets[layer], offsets[layer + 1] - offsets[layer]);
  }
};

/// Per-layer alignment targets for O-Align.
struct AlignTemplates {
  std::vector<std::pair<Matrix, Matrix>> layers;
  std::uint64_t seed = 0;

  /// Full-rank Gaussian templates with the given per-layer (n, m) shapes and ranks.
  static AlignTemplates generate(std::span<const std::pair<std::size_t, std::size_t>> shapes,
                                 std::span<const std::size_t> ranks, std::uint64_t seed);
  /// Templates shaped like `like`.
  static AlignTemplates generate_like(const LoraUpdate& like, std::uint64_t seed);
};

/// Row-major U_1, V_1, …, U_L, V_L.
FeatureVector featurize_flatten(const LoraUpdate& x);

/// Aligns each layer to its template with Q_i = procrustes(U_iᵀT_u + V_iᵀT_v),
/// then flattens (U_iQ_i, V_iQ_i).
FeatureVector featurize_o_align(const LoraUpdate& x, const AlignTemplates& t);

/// σ(U_iV_iᵀ) without densifying: singular values of R_u·R_vᵀ from thin QRs of
/// U_i and V_i. Each layer's descending list is truncated or zero-padded to
/// `target_rank`.
FeatureVector featurize_svd(const LoraUpdate& x, std::size_t target_rank);

/// Row-major dense products U_iV_iᵀ. Throws CapabilityError naming the layer
/// when n_i·m_i exceeds `dense_cap`.
FeatureVector featurize_dense(const LoraUpdate& x, std::size_t dense_cap = kDefaultDenseCap);

/// A featurization method plus its parameters.
struct FeaturizerConfig {
  FeatureMethod method = FeatureMethod::flatten;
  std::size_t target_rank = 0;  ///< svd only; 0 means "use each layer's own rank"
  std::optional<AlignTemplates> templates;  ///< o_align only
  std::size_t dense_cap = kDefaultDenseCap;
};

FeatureVector featurize(const FeaturizerConfig& cfg, const LoraUpdate& x);

/// Featurizes every update, in parallel over items; results keep input order.
std::vector<FeatureVector> featurize_batch(const FeaturizerConfig& cfg, std::span<const LoraUpdate> xs);

// LOLF feature dump:
//   "LOLF" | u32 version=1 | u32 count | u32 dim | count·dim f32 (row-major)
// with a JSON sidecar {"method", "dim", "count", "offsets", "target_rank"}.
inline constexpr std::uint32_t kLolfVersion = 1;

struct FeatureTable {
  FeatureMethod method = FeatureMethod::flatten;
  std::vector<std::size_t> offsets;
  std::size_t target_rank = 0;
  Matrix rows;  ///< count × dim
};

FeatureTable make_feature_table(std::span<const FeatureVector> features, std::size_t target_rank = 0);
std::vector<std::uint8_t> encode_lolf(const FeatureTable& table);
Matrix decode_lolf(std::span<const std::uint8_t> bytes);
/// Writes `path` (binary) and `path` + ".json" (layout descriptor).
void save_features(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_features(const std::filesystem::path& path);

}  // namespace lol
