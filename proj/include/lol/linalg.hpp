// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <vector>

#include "lol/matrix.hpp"

namespace lol {

/// Largest min(rows, cols) accepted by svd_small.
inline constexpr std::size_t kSvdMaxDim = 128;

struct QrResult {
  Matrix q;  ///< rows×cols, orthonormal columns
  Matrix r;  ///< cols×cols, upper triangular, diag ≥ 0
};

/// Thin Householder QR of a tall matrix (rows ≥ cols). Rank-deficient input is
/// accepted; the corresponding diagonal entries of r come out (near) zero.
QrResult qr_thin(const Matrix& a);

/// Thin SVD a = left·diag(singular)·rightᵀ with k = min(rows, cols) components.
///
/// Singular values are sorted descending. Signs are fixed so that the entry of
/// largest magnitude in each left singular vector is non-negative (first index
/// wins ties), which makes the factorization a deterministic function of `a`.
struct SvdResult {
  Matrix left;                  ///< rows×k
  std::vector<double> singular; ///< k values
  Matrix right;                 ///< cols×k
};

/// One-sided (Hestenes) Jacobi SVD with cyclic sweeps. Throws CapabilityError
/// when min(rows, cols) exceeds kSvdMaxDim.
SvdResult svd_small(const Matrix& a);

std::vector<double> singular_values(const Matrix& a);

/// left·diag(singular)·rightᵀ.
Matrix reconstruct(const SvdResult& s);

/// σ_max / σ_min of a square matrix; +inf when singular.
double condition_number(const Matrix& a);

/// Inverse via Gauss-Jordan elimination with partial pivoting. Throws
/// NumericalError on an exactly singular pivot.
Matrix inverse(const Matrix& a);

/// Orthogonal Q maximizing trace(Qᵀm): Q = A·Bᵀ where m = AΣBᵀ. Degenerate m
/// (repeated or zero singular values) still yields an orthogonal Q, chosen by
/// the SVD sign convention.
Matrix procrustes(const Matrix& m);

}  // namespace lol
