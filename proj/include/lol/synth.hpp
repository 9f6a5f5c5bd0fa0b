// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

// Seeded synthetic LoRA datasets whose labels depend on the dense products
// U_iV_iᵀ only, so the ground truth is exactly GL(r)-invariant.
//
// Factor entries are drawn with variance s_i/√r for a per-layer scale
// log s_i ~ U[log 0.25, log 4], which gives product entries of variance s_i² whatever the
// rank. Splits are 70/10/20 (train/val/test) by index; each split draws its
// items from its own seed range, so no item can appear in two splits.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lol/dataset.hpp"

namespace lol {

enum class Teacher {
  frobenius_of_product,  ///< √(Σ_i ‖P_i‖_F² / Σ_i n_i m_i)
  rowsum_tanh_score,     ///< mean_i mean_j tanh²(rowsum_j(P_i) / √m_i)
  planted_multilabel,    ///< bit k = 1[a_kᵀ P_1 b_k + noise > 0]
};

enum class GaugePolicy { canonical, scrambled_train_and_test, canonical_train_scrambled_test };

std::string_view to_string(Teacher teacher);
std::string_view to_string(GaugePolicy policy);
Teacher parse_teacher(std::string_view s);
GaugePolicy parse_gauge_policy(std::string_view s);

struct SynthTaskSpec {
  std::vector<std::pair<std::size_t, std::size_t>> layers = {{64, 64}, {64, 64}};
  std::size_t rank = 4;
  std::size_t count = 2000;
  Teacher teacher = Teacher::frobenius_of_product;
  GaugePolicy gauge_policy = GaugePolicy::canonical;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::size_t probes = 4;        ///< planted_multilabel label width
  double gauge_cond = 1e3;       ///< condition bound of scrambling draws

  /// Throws std::invalid_argument unless count ≥ 4, noise_std ≥ 0, rank ≥ 1
  /// and every layer has n, m ≥ rank.
  void validate() const;
};

/// Label range every noiseless teacher value lies in.
std::pair<double, double> teacher_range(Teacher teacher);

/// Rank-one probes (a_k, b_k) on the first layer; depend on the seed and
/// first-layer shape only.
std::vector<std::pair<std::vector<double>, std::vector<double>>> planted_probes(const SynthTaskSpec& spec);

/// Noiseless teacher value of `x` (one entry per label dimension).
std::vector<double> teacher_value(const SynthTaskSpec& spec, const LoraUpdate& x);

/// Factors are stored at float32 precision. Scrambled items are checked to
/// keep their label; a mismatch throws NumericalError.
TaskDataset generate(const SynthTaskSpec& spec);

/// One dataset per rank with identical seeds, teacher and label
/// distribution; models are trained on the base rank.
std::vector<TaskDataset> generate_rank_sweep(const SynthTaskSpec& base, std::span<const std::size_t> ranks);

}  // namespace lol
