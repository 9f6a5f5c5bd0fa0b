// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/mlp.hpp"

#include <cmath>
#include <string>

#include "lol/errors.hpp"

namespace lol {

MlpParams MlpParams::init(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("MlpParams::init: need at least input and output dims");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(dims[l], 1)));
    p.layers.push_back({gaussian_matrix(dims[l], dims[l + 1], rng, stddev), std::vector<double>(dims[l + 1], 0.0)});
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& p) {
  MlpParams z;
  for (const auto& layer : p.layers)
    z.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()), std::vector<double>(layer.bias.size(), 0.0)});
  return z;
}

std::vector<std::size_t> MlpParams::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(input_dim());
  for (const auto& layer : layers) d.push_back(layer.weight.cols());
  return d;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    out.push_back(layer.weight.data());
    out.push_back(layer.bias);
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers) {
    out.push_back(layer.weight.data());
    out.push_back(layer.bias);
  }
  return out;
}

Matrix mlp_forward_batch(const MlpParams& p, const Matrix& x, MlpTrace* trace) {
  if (p.layers.empty()) return x;
  if (x.cols() != p.input_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " features, network expects " +
                     std::to_string(p.input_dim()));
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    Matrix z = matmul(h, layer.weight);
    for (std::size_t b = 0; b < z.rows(); ++b) {
      auto row = z.row(b);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
    }
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(z);
    }
    if (l + 1 < p.layers.size())
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
    h = std::move(z);
  }
  return h;
}

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> f) {
  Matrix x(1, f.size(), std::vector<double>(f.begin(), f.end()));
  Matrix y = mlp_forward_batch(p, x);
  return {y.data().begin(), y.data().end()};
}

std::vector<double> mlp_forward(const MlpParams& p, const FeatureVector& f) { return mlp_forward(p, f.values); }

MlpGradients mlp_backward_batch(const MlpParams& p, const MlpTrace& trace, const Matrix& upstream) {
  MlpGradients g{MlpParams::zeros_like(p), Matrix()};
  if (p.layers.empty()) {
    g.input = upstream;
    return g;
  }
  if (trace.inputs.size() != p.layers.size()) throw ShapeError("mlp_backward: trace does not match network");
  Matrix delta = upstream;  // gradient w.r.t. the output of layer l (post-activation)
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    if (l + 1 < p.layers.size()) {
      const Matrix& pre = trace.pre[l];
      for (std::size_t k = 0; k < delta.size(); ++k)
        if (!(pre.data()[k] > 0.0)) delta.data()[k] = 0.0;
    }
    auto& gl = g.params.layers[l];
    gl.weight = matmul_tn(trace.inputs[l], delta);
    for (std::size_t b = 0; b < delta.rows(); ++b) {
      auto row = delta.row(b);
      for (std::size_t j = 0; j < row.size(); ++j) gl.bias[j] += row[j];
    }
    delta = matmul(delta, p.layers[l].weight.transpose());
  }
  g.input = std::move(delta);
  return g;
}

MlpGradients mlp_backward(const MlpParams& p, std::span<const double> f, std::span<const double> upstream) {
  Matrix x(1, f.size(), std::vector<double>(f.begin(), f.end()));
  MlpTrace trace;
  Matrix y = mlp_forward_batch(p, x, &trace);
  if (upstream.size() != y.cols()) throw ShapeError("mlp_backward: upstream size does not match output");
  return mlp_backward_batch(p, trace, Matrix(1, upstream.size(), std::vector<double>(upstream.begin(), upstream.end())));
}

}  // namespace lol
