// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lol/matrix.hpp"
#include "lol/random.hpp"

namespace lol {

/// One adapted weight: the update is u·vᵀ with u n×r and v m×r.
struct LoraLayer {
  std::string name;
  Matrix u;
  Matrix v;

  std::size_t n() const noexcept { return u.rows(); }
  std::size_t m() const noexcept { return v.rows(); }
  std::size_t rank() const noexcept { return u.cols(); }

  friend bool operator==(const LoraLayer&, const LoraLayer&) = default;
};

/// Ordered list of factor pairs. Each layer's factors share a column count and
/// names are unique; the constructor enforces both.
class LoraUpdate {
 public:
  LoraUpdate() = default;
  explicit LoraUpdate(std::vector<LoraLayer> layers);

  const std::vector<LoraLayer>& layers() const noexcept { return layers_; }
  const LoraLayer& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::vector<std::size_t> ranks() const;

  friend bool operator==(const LoraUpdate&, const LoraUpdate&) = default;

 private:
  std::vector<LoraLayer> layers_;
};

/// u·vᵀ for one layer.
Matrix dense_product(const LoraLayer& layer);

/// Largest |entry| over all dense products.
double product_scale(const LoraUpdate& x);

/// Per-layer rank shapes; used to check that two updates are structurally alike.
bool same_structure(const LoraUpdate& a, const LoraUpdate& b);

/// One factor R of a group element together with its cached inverse transpose.
struct GroupFactor {
  Matrix r;
  Matrix r_inv_t;
};

/// Element of GL(r_1) × ⋯ × GL(r_L) acting on an update as (U_i R_i, V_i R_i^{-⊤}).
class GroupElement {
 public:
  /// Inverts each factor. Throws NumericalError if a factor is singular and
  /// ShapeError if one is not square.
  static GroupElement from_matrices(std::vector<Matrix> factors);
  static GroupElement identity(std::span<const std::size_t> ranks);
  /// Condition-bounded Gaussian draw per layer.
  static GroupElement random(std::span<const std::size_t> ranks, double cond_bound, Rng& rng);
  static GroupElement random_orthogonal(std::span<const std::size_t> ranks, Rng& rng);

  const std::vector<GroupFactor>& factors() const noexcept { return factors_; }
  std::size_t size() const noexcept { return factors_.size(); }
  std::vector<std::size_t> ranks() const;

 private:
  std::vector<GroupFactor> factors_;
};

/// Factor-wise product (g·h)_i = g_i·h_i; act(act(x, g), h) = act(x, compose(g, h)).
GroupElement compose(const GroupElement& g, const GroupElement& h);

/// Layer i becomes (U_i R_i, V_i R_i^{-⊤}). Throws ShapeError on structure mismatch.
LoraUpdate act(const LoraUpdate& x, const GroupElement& g);

/// Per-layer cap on n·m for operations that materialize dense products.
inline constexpr std::size_t kDefaultDenseCap = 4'000'000;

/// True iff every layer's dense products agree within tol·max(1, scale), where
/// scale is the largest |entry| of x's dense products. Test oracle; densifies.
bool functionally_equal(const LoraUpdate& x, const LoraUpdate& y, double tol,
                        std::size_t dense_cap = kDefaultDenseCap);

struct LayerRank {
  std::size_t u = 0;
  std::size_t v = 0;
  friend bool operator==(const LayerRank&, const LayerRank&) = default;
};

/// Per layer, the number of singular values of U and of V above tol × the largest.
std::vector<LayerRank> numerical_rank(const LoraUpdate& x, double tol = 1e-10);
bool is_full_rank(const LoraUpdate& x, double tol = 1e-10);

/// Permutation swapping the first two basis vectors in every layer (identity
/// factor when r < 2). Orthogonal, so it moves any non-invariant featurizer.
GroupElement swap_witness(std::span<const std::size_t> ranks);

/// a·I in every layer: scales U by a and V by 1/a.
GroupElement scaling_witness(std::span<const std::size_t> ranks, double a);

/// Given full-rank x, y with equal dense products, constructs the group element g
/// with act(y, g) = x, namely R_i = V_i'ᵀ V_i (V_iᵀ V_i)^{-1}. Returns nullopt when
/// either update is rank deficient or the products differ beyond tol.
std::optional<GroupElement> recover_gauge(const LoraUpdate& x, const LoraUpdate& y, double tol = 1e-8);

/// Four-axis tensor; the last axis is the hidden (rank) channel.
struct Tensor4 {
  std::array<std::size_t, 4> shape{};
  std::vector<double> data;  ///< row-major

  double& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
};

/// Flattens all axes except the hidden channel, row-major, yielding matrices
/// with r columns. Throws ShapeError when hidden sizes differ.
std::pair<Matrix, Matrix> flatten_conv(const Tensor4& u4, const Tensor4& v4);

/// Inverse of the flattening for one factor; `shape[3]` must equal m.cols().
Tensor4 unflatten_conv(const Matrix& m, std::array<std::size_t, 4> shape);

}  // namespace lol
