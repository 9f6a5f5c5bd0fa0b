// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/lora.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "lol/errors.hpp"
#include "lol/linalg.hpp"

namespace lol {

LoraUpdate::LoraUpdate(std::vector<LoraLayer> layers) : layers_(std::move(layers)) {
  std::set<std::string> names;
  for (const auto& layer : layers_) {
    if (layer.u.cols() != layer.v.cols())
      throw ShapeError("LoraUpdate: layer '" + layer.name + "' has u with " + std::to_string(layer.u.cols()) +
                       " columns but v with " + std::to_string(layer.v.cols()));
    if (!names.insert(layer.name).second) throw ShapeError("LoraUpdate: duplicate layer name '" + layer.name + "'");
  }
}

std::vector<std::size_t> LoraUpdate::ranks() const {
  std::vector<std::size_t> r;
  r.reserve(layers_.size());
  for (const auto& layer : layers_) r.push_back(layer.rank());
  return r;
}

Matrix dense_product(const LoraLayer& layer) { return matmul_nt(layer.u, layer.v); }

double product_scale(const LoraUpdate& x) {
  double s = 0.0;
  for (const auto& layer : x.layers()) s = std::max(s, max_abs(dense_product(layer)));
  return s;
}

bool same_structure(const LoraUpdate& a, const LoraUpdate& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t i = 0; i < a.layer_count(); ++i) {
    const auto& la = a.layer(i);
    const auto& lb = b.layer(i);
    if (la.n() != lb.n() || la.m() != lb.m() || la.rank() != lb.rank()) return false;
  }
  return true;
}

GroupElement GroupElement::from_matrices(std::vector<Matrix> factors) {
  GroupElement g;
  g.factors_.reserve(factors.size());
  for (auto& r : factors) {
    if (r.rows() != r.cols()) throw ShapeError("GroupElement: factor is not square");
    Matrix inv_t = inverse(r).transpose();
    g.factors_.push_back({std::move(r), std::move(inv_t)});
  }
  return g;
}

GroupElement GroupElement::identity(std::span<const std::size_t> ranks) {
  GroupElement g;
  for (std::size_t r : ranks) g.factors_.push_back({Matrix::identity(r), Matrix::identity(r)});
  return g;
}

GroupElement GroupElement::random(std::span<const std::size_t> ranks, double cond_bound, Rng& rng) {
  std::vector<Matrix> factors;
  for (std::size_t r : ranks) factors.push_back(random_gl(r, cond_bound, rng));
  return from_matrices(std::move(factors));
}

GroupElement GroupElement::random_orthogonal(std::span<const std::size_t> ranks, Rng& rng) {
  GroupElement g;
  for (std::size_t r : ranks) {
    Matrix q = lol::random_orthogonal(r, rng);
    Matrix q_copy = q;
    g.factors_.push_back({std::move(q), std::move(q_copy)});
  }
  return g;
}

std::vector<std::size_t> GroupElement::ranks() const {
  std::vector<std::size_t> r;
  for (const auto& f : factors_) r.push_back(f.r.rows());
  return r;
}

GroupElement compose(const GroupElement& g, const GroupElement& h) {
  if (g.size() != h.size()) throw ShapeError("compose: group elements have different factor counts");
  std::vector<Matrix> factors;
  for (std::size_t i = 0; i < g.size(); ++i) factors.push_back(matmul(g.factors()[i].r, h.factors()[i].r));
  return GroupElement::from_matrices(std::move(factors));
}

LoraUpdate act(const LoraUpdate& x, const GroupElement& g) {
  if (x.layer_count() != g.size())
    throw ShapeError("act: update has " + std::to_string(x.layer_count()) + " layers, group element has " +
                     std::to_string(g.size()) + " factors");
  std::vector<LoraLayer> out;
  out.reserve(x.layer_count());
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    const auto& layer = x.layer(i);
    const auto& f = g.factors()[i];
    if (f.r.rows() != layer.rank())
      throw ShapeError("act: layer '" + layer.name + "' has rank " + std::to_string(layer.rank()) +
                       " but factor is " + std::to_string(f.r.rows()) + "x" + std::to_string(f.r.cols()));
    out.push_back({layer.name, matmul(layer.u, f.r), matmul(layer.v, f.r_inv_t)});
  }
  return LoraUpdate(std::move(out));
}

bool functionally_equal(const LoraUpdate& x, const LoraUpdate& y, double tol, std::size_t dense_cap) {
  if (x.layer_count() != y.layer_count()) throw ShapeError("functionally_equal: layer counts differ");
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    const auto& a = x.layer(i);
    const auto& b = y.layer(i);
    if (a.n() != b.n() || a.m() != b.m()) throw ShapeError("functionally_equal: layer '" + a.name + "' shapes differ");
    if (a.n() * a.m() > dense_cap)
      throw CapabilityError("functionally_equal: layer '" + a.name + "' product exceeds dense cap of " +
                            std::to_string(dense_cap) + " entries");
  }
  std::vector<Matrix> px, py;
  double scale = 0.0;
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    px.push_back(dense_product(x.layer(i)));
    py.push_back(dense_product(y.layer(i)));
    scale = std::max(scale, max_abs(px.back()));
  }
  const double bound = tol * std::max(1.0, scale);
  for (std::size_t i = 0; i < px.size(); ++i)
    if (max_abs_diff(px[i], py[i]) > bound) return false;
  return true;
}

namespace {

std::size_t rank_of(const Matrix& a, double tol) {
  if (a.empty()) return 0;
  const auto sv = singular_values(a);
  if (sv.empty() || sv.front() == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [&](double s) { return s > tol * sv.front(); }));
}

}  // namespace

std::vector<LayerRank> numerical_rank(const LoraUpdate& x, double tol) {
  std::vector<LayerRank> out;
  for (const auto& layer : x.layers()) out.push_back({rank_of(layer.u, tol), rank_of(layer.v, tol)});
  return out;
}

bool is_full_rank(const LoraUpdate& x, double tol) {
  const auto ranks = numerical_rank(x, tol);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const std::size_t r = x.layer(i).rank();
    if (ranks[i].u != r || ranks[i].v != r) return false;
  }
  return true;
}

GroupElement swap_witness(std::span<const std::size_t> ranks) {
  std::vector<Matrix> factors;
  for (std::size_t r : ranks) {
    Matrix p = Matrix::identity(r);
    if (r >= 2) {
      p(0, 0) = 0.0;
      p(1, 1) = 0.0;
      p(0, 1) = 1.0;
      p(1, 0) = 1.0;
    }
    factors.push_back(std::move(p));
  }
  return GroupElement::from_matrices(std::move(factors));
}

GroupElement scaling_witness(std::span<const std::size_t> ranks, double a) {
  std::vector<Matrix> factors;
  for (std::size_t r : ranks) factors.push_back(a * Matrix::identity(r));
  return GroupElement::from_matrices(std::move(factors));
}

std::optional<GroupElement> recover_gauge(const LoraUpdate& x, const LoraUpdate& y, double tol) {
  if (!same_structure(x, y)) return std::nullopt;
  if (!is_full_rank(x) || !is_full_rank(y)) return std::nullopt;
  if (!functionally_equal(x, y, tol)) return std::nullopt;
  std::vector<Matrix> factors;
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    const Matrix& v = x.layer(i).v;
    const Matrix& v_prime = y.layer(i).v;
    factors.push_back(matmul(matmul_tn(v_prime, v), inverse(matmul_tn(v, v))));
  }
  return GroupElement::from_matrices(std::move(factors));
}

std::pair<Matrix, Matrix> flatten_conv(const Tensor4& u4, const Tensor4& v4) {
  if (u4.shape[3] != v4.shape[3])
    throw ShapeError("flatten_conv: hidden channel sizes differ (" + std::to_string(u4.shape[3]) + " vs " +
                     std::to_string(v4.shape[3]) + ")");
  auto flat = [](const Tensor4& t) {
    const std::size_t rows = t.shape[0] * t.shape[1] * t.shape[2];
    if (t.data.size() != rows * t.shape[3]) throw ShapeError("flatten_conv: tensor data does not match its shape");
    return Matrix(rows, t.shape[3], t.data);
  };
  return {flat(u4), flat(v4)};
}

Tensor4 unflatten_conv(const Matrix& m, std::array<std::size_t, 4> shape) {
  if (shape[3] != m.cols() || shape[0] * shape[1] * shape[2] != m.rows())
    throw ShapeError("unflatten_conv: shape does not match matrix");
  Tensor4 t;
  t.shape = shape;
  t.data.assign(m.data().begin(), m.data().end());
  return t;
}

}  // namespace lol
