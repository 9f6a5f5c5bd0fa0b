// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

// GL(r)-invariant network over LoRA factors.
//
// A forward pass applies one or more equivariant linear stacks
// (U_i, V_i) -> (Φ_i U_i, Ψ_i V_i), optionally separated by the equivariant
// row-gating nonlinearity, then the invariant head: an MLP over the
// concatenated products Ũ_i Ṽ_iᵀ. Because every stage only multiplies the
// factors from the left, act(·, g) commutes with the stacks and cancels in
// the products.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lol/lora.hpp"
#include "lol/mlp.hpp"

namespace lol {

enum class Nonlinearity {
  none,
  relu_sign,    ///< σ(s) = ReLU(sign(s)): keeps or zeroes whole rows
  tanh_rowsum,  ///< σ(s) = tanh(s): smooth variant
};

std::string_view to_string(Nonlinearity kind);
Nonlinearity parse_nonlinearity(std::string_view s);

/// One equivariant linear layer: phi[i] is n'×n_i, psi[i] is m'×m_i. No biases.
struct EquivariantLayer {
  std::vector<Matrix> phi;
  std::vector<Matrix> psi;

  friend bool operator==(const EquivariantLayer&, const EquivariantLayer&) = default;
};

struct GlNetConfig {
  std::size_t hidden_width = 32;
  std::size_t stacks = 1;
  Nonlinearity nonlinearity = Nonlinearity::none;
  std::vector<std::size_t> head_hidden = {256, 128};
  std::size_t output_dim = 1;
  std::size_t product_cap = 1 << 16;  ///< per-layer ñ·m̃ limit in the head
};

struct GlNetParams {
  std::vector<EquivariantLayer> stacks;
  Nonlinearity nonlinearity = Nonlinearity::none;
  MlpParams head;
  std::size_t hidden_width = 32;
  std::size_t product_cap = 1 << 16;

  /// Φ, Ψ: random semi-orthogonal with entry variance 1/fan-in; head MLP
  /// N(0, 1/fan-in). `shapes` holds (n_i, m_i).
  static GlNetParams init(std::span<const std::pair<std::size_t, std::size_t>> shapes, const GlNetConfig& cfg,
                          Rng& rng);
  static GlNetParams zeros_like(const GlNetParams& p);

  /// Φ/Ψ of every stack in declaration order, then the head tensors.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  friend bool operator==(const GlNetParams&, const GlNetParams&) = default;
};

/// Layer i becomes (Φ_i U_i, Ψ_i V_i).
LoraUpdate equivariant_linear(const EquivariantLayer& p, const LoraUpdate& x);

/// Row i of U scaled by σ(i-th row sum of UVᵀ), row j of V by σ(j-th column sum).
/// The sums are U·(Vᵀ1) and V·(Uᵀ1); the product is never formed.
LoraUpdate equivariant_nonlinearity(const LoraUpdate& x, Nonlinearity kind);

/// Flattened row-major concatenation of the per-layer products. Throws
/// CapabilityError when a product exceeds `product_cap` entries.
std::vector<double> head_features(const LoraUpdate& x, std::size_t product_cap);

/// MLP over head_features(x).
std::vector<double> invariant_head(const LoraUpdate& x, const MlpParams& mlp, std::size_t product_cap = 1 << 16);

/// Hidden factors after every stack (and nonlinearity) but before the head.
LoraUpdate glnet_features(const GlNetParams& p, const LoraUpdate& x);

std::vector<double> glnet_forward(const GlNetParams& p, const LoraUpdate& x);

/// Gradients of ⟨upstream, glnet_forward(p, x)⟩ with respect to every
/// parameter. The relu_sign gate is piecewise constant, so it contributes no
/// gradient through the row sums.
GlNetParams glnet_backward(const GlNetParams& p, const LoraUpdate& x, std::span<const double> upstream);

/// Forward over a batch of updates, returning a B × out matrix. The MLP head
/// runs batched; per-item stack work is spread over worker threads.
Matrix glnet_forward_batch(const GlNetParams& p, std::span<const LoraUpdate* const> xs);

/// Summed gradients over a batch; upstream is B × out. Item contributions are
/// reduced in index order.
GlNetParams glnet_backward_batch(const GlNetParams& p, std::span<const LoraUpdate* const> xs, const Matrix& upstream);

struct GlNetStep {
  Matrix output;
  GlNetParams grads;
};

/// One forward pass, then the backward pass for upstream = upstream_of(output).
GlNetStep glnet_forward_backward(const GlNetParams& p, std::span<const LoraUpdate* const> xs,
                                 const std::function<Matrix(const Matrix&)>& upstream_of);

/// Output of one forward pass plus the gate pattern of every nonlinearity and
/// head rectifier, for checks that must avoid kinks.
struct GlNetActivationPattern {
  std::vector<bool> gates;
  friend bool operator==(const GlNetActivationPattern&, const GlNetActivationPattern&) = default;
};
GlNetActivationPattern glnet_activation_pattern(const GlNetParams& p, const LoraUpdate& x);

}  // namespace lol
