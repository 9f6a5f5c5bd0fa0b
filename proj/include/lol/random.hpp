// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstdint>

#include "lol/matrix.hpp"

namespace lol {

/// Counter-based 64-bit generator. The output stream is a pure function of
/// (key, counter), so a generator can be split into independent child streams
/// by deriving a new key from (key, stream id) without touching the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  /// Independent child generator for `stream`; does not advance this generator.
  Rng split(std::uint64_t stream) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller. Each call consumes two counter values.
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// rows×cols matrix with iid N(0, stddev²) entries.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);

/// Invertible r×r matrix with condition number at most `cond_bound`. Gaussian
/// draws are rejected until the bound holds. Deterministic given `seed`.
Matrix random_gl(std::size_t r, double cond_bound, std::uint64_t seed);
Matrix random_gl(std::size_t r, double cond_bound, Rng& rng);

/// Haar-distributed orthogonal r×r matrix (QR of a Gaussian matrix, diag(R) ≥ 0).
Matrix random_orthogonal(std::size_t r, std::uint64_t seed);
Matrix random_orthogonal(std::size_t r, Rng& rng);

}  // namespace lol
