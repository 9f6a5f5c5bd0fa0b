// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lol/featurizers.hpp"
#include "lol/matrix.hpp"
#include "lol/random.hpp"

namespace lol {

/// Affine map y = x·weight + bias; weight is in×out.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Affine layers with a rectifier between consecutive layers and none after the last.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Gaussian weights with variance 1/fan-in, zero biases. dims = {in, hidden..., out}.
  static MlpParams init(std::span<const std::size_t> dims, Rng& rng);
  /// Same shapes, all zeros (used as a gradient accumulator).
  static MlpParams zeros_like(const MlpParams& p);

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
  std::vector<std::size_t> dims() const;

  /// Views over every parameter tensor, weights then bias per layer.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Per-layer inputs and pre-activations of one batched forward pass.
struct MlpTrace {
  std::vector<Matrix> inputs;  ///< input to layer l (B × in_l)
  std::vector<Matrix> pre;     ///< x·W + b of layer l (B × out_l)
};

struct MlpGradients {
  MlpParams params;  ///< summed over the batch
  Matrix input;      ///< B × in
};

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> f);
std::vector<double> mlp_forward(const MlpParams& p, const FeatureVector& f);

/// Rows of `x` are independent inputs.
Matrix mlp_forward_batch(const MlpParams& p, const Matrix& x, MlpTrace* trace = nullptr);

/// Gradients of Σ_b ⟨upstream_b, output_b⟩ for the batch recorded in `trace`.
MlpGradients mlp_backward_batch(const MlpParams& p, const MlpTrace& trace, const Matrix& upstream);

MlpGradients mlp_backward(const MlpParams& p, std::span<const double> f, std::span<const double> upstream);

}  // namespace lol
