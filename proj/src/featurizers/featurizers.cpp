// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/featurizers.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "lol/errors.hpp"
#include "lol/linalg.hpp"
#include "lol/parallel.hpp"

namespace lol {

std::string_view to_string(FeatureMethod method) {
  switch (method) {
    case FeatureMethod::flatten: return "flatten";
    case FeatureMethod::o_align: return "oalign";
    case FeatureMethod::svd: return "svd";
    case FeatureMethod::dense: return "dense";
  }
  return "flatten";
}

FeatureMethod parse_feature_method(std::string_view s) {
  if (s == "flatten") return FeatureMethod::flatten;
  if (s == "oalign" || s == "o_align") return FeatureMethod::o_align;
  if (s == "svd") return FeatureMethod::svd;
  if (s == "dense") return FeatureMethod::dense;
  throw std::invalid_argument("unknown feature method '" + std::string(s) + "'");
}

AlignTemplates AlignTemplates::generate(std::span<const std::pair<std::size_t, std::size_t>> shapes,
                                        std::span<const std::size_t> ranks, std::uint64_t seed) {
  if (shapes.size() != ranks.size()) throw ShapeError("AlignTemplates: shapes and ranks differ in length");
  AlignTemplates t;
  t.seed = seed;
  const Rng root(seed);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Rng rng = root.split(i);
    for (;;) {
      Matrix u = gaussian_matrix(shapes[i].first, ranks[i], rng);
      Matrix v = gaussian_matrix(shapes[i].second, ranks[i], rng);
      LoraUpdate probe({{"t", u, v}});
      if (is_full_rank(probe)) {
        t.layers.emplace_back(std::move(u), std::move(v));
        break;
      }
    }
  }
  return t;
}

AlignTemplates AlignTemplates::generate_like(const LoraUpdate& like, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (const auto& layer : like.layers()) shapes.emplace_back(layer.n(), layer.m());
  const auto ranks = like.ranks();
  return generate(shapes, ranks, seed);
}

namespace {

void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.data().begin(), m.data().end()); }

// Triangular (or raw, for wide inputs) factor whose Gram matrix equals aᵀa.
Matrix gram_factor(const Matrix& a) {
  if (a.rows() >= a.cols()) return qr_thin(a).r;
  return a;
}

}  // namespace

FeatureVector featurize_flatten(const LoraUpdate& x) {
  FeatureVector f;
  f.method = FeatureMethod::flatten;
  f.offsets.push_back(0);
  for (const auto& layer : x.layers()) {
    append(f.values, layer.u);
    append(f.values, layer.v);
    f.offsets.push_back(f.values.size());
  }
  return f;
}

FeatureVector featurize_o_align(const LoraUpdate& x, const AlignTemplates& t) {
  if (t.layers.size() != x.layer_count())
    throw ShapeError("featurize_o_align: " + std::to_string(t.layers.size()) + " templates for " +
                     std::to_string(x.layer_count()) + " layers");
  FeatureVector f;
  f.method = FeatureMethod::o_align;
  f.offsets.push_back(0);
  for (std::size_t i = 0; i < x.layer_count(); ++i) {
    const auto& layer = x.layer(i);
    const auto& [tu, tv] = t.layers[i];
    if (tu.rows() != layer.n() || tu.cols() != layer.rank() || tv.rows() != layer.m() || tv.cols() != layer.rank())
      throw ShapeError("featurize_o_align: template for layer '" + layer.name + "' has the wrong shape");
    const Matrix m = matmul_tn(layer.u, tu) + matmul_tn(layer.v, tv);
    const Matrix q = procrustes(m);
    append(f.values, matmul(layer.u, q));
    append(f.values, matmul(layer.v, q));
    f.offsets.push_back(f.values.size());
  }
  return f;
}

FeatureVector featurize_svd(const LoraUpdate& x, std::size_t target_rank) {
  FeatureVector f;
  f.method = FeatureMethod::svd;
  f.offsets.push_back(0);
  for (const auto& layer : x.layers()) {
    const std::size_t k = target_rank == 0 ? layer.rank() : target_rank;
    std::vector<double> sv;
    if (layer.rank() > 0) sv = singular_values(matmul_nt(gram_factor(layer.u), gram_factor(layer.v)));
    sv.resize(k, 0.0);
    f.values.insert(f.values.end(), sv.begin(), sv.end());
    f.offsets.push_back(f.values.size());
  }
  return f;
}

FeatureVector featurize_dense(const LoraUpdate& x, std::size_t dense_cap) {
  for (const auto& layer : x.layers())
    if (layer.n() * layer.m() > dense_cap)
      throw CapabilityError("featurize_dense: layer '" + layer.name + "' product is " + std::to_string(layer.n()) +
                            "x" + std::to_string(layer.m()) + ", over the dense cap of " + std::to_string(dense_cap) +
                            " entries");
  FeatureVector f;
  f.method = FeatureMethod::dense;
  f.offsets.push_back(0);
  for (const auto& layer : x.layers()) {
    append(f.values, dense_product(layer));
    f.offsets.push_back(f.values.size());
  }
  return f;
}

FeatureVector featurize(const FeaturizerConfig& cfg, const LoraUpdate& x) {
  switch (cfg.method) {
    case FeatureMethod::flatten: return featurize_flatten(x);
    case FeatureMethod::o_align:
      if (!cfg.templates) throw std::invalid_argument("featurize: o_align needs templates");
      return featurize_o_align(x, *cfg.templates);
    case FeatureMethod::svd: return featurize_svd(x, cfg.target_rank);
    case FeatureMethod::dense: return featurize_dense(x, cfg.dense_cap);
  }
  throw std::invalid_argument("featurize: unknown method");
}

std::vector<FeatureVector> featurize_batch(const FeaturizerConfig& cfg, std::span<const LoraUpdate> xs) {
  std::vector<FeatureVector> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out[i] = featurize(cfg, xs[i]); });
  return out;
}

}  // namespace lol
