// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/linalg.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lol/errors.hpp"

namespace lol {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Completes rows of `basis` listed in `missing` to an orthonormal set, using
// standard basis vectors in order as candidates. `basis` stores vectors as rows.
void complete_orthonormal(Matrix& basis, const std::vector<bool>& present) {
  const std::size_t dim = basis.cols();
  std::size_t candidate = 0;
  for (std::size_t j = 0; j < basis.rows(); ++j) {
    if (present[j]) continue;
    std::vector<bool> now = present;
    for (std::size_t k = 0; k < j; ++k) now[k] = true;
    for (; candidate < dim; ++candidate) {
      std::vector<double> v(dim, 0.0);
      v[candidate] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < basis.rows(); ++k) {
          if (!now[k]) continue;
          const double c = dot(v, basis.row(k));
          for (std::size_t i = 0; i < dim; ++i) v[i] -= c * basis(k, i);
        }
      }
      const double nv = norm2(v);
      if (nv > 0.5) {
        for (std::size_t i = 0; i < dim; ++i) basis(j, i) = v[i] / nv;
        ++candidate;
        break;
      }
    }
  }
}

// Jacobi on a tall matrix given as its transpose (columns stored as rows).
SvdResult jacobi_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix w = a.transpose();  // n×m, row j = column j of a
  Matrix v = Matrix::identity(n);  // row j = column j of the right factor
  const double tol = static_cast<double>(std::max<std::size_t>(m, 1)) * DBL_EPSILON;
  constexpr int kMaxSweeps = 80;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = w.row(p);
        auto wq = w.row(q);
        const double alpha = dot(wp, wp);
        const double beta = dot(wq, wq);
        const double gamma = dot(wp, wq);
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = wp[i];
          const double xq = wq[i];
          wp[i] = c * xp - s * xq;
          wq[i] = s * xp + c * xq;
        }
        auto vp = v.row(p);
        auto vq = v.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = vp[i];
          const double xq = vq[i];
          vp[i] = c * xp - s * xq;
          vq[i] = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(w.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Matrix left_rows(n, m);  // row j = left singular vector j
  Matrix right_rows(n, n);
  std::vector<double> singular(n);
  std::vector<bool> present(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    singular[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) right_rows(k, i) = v(j, i);
    if (sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) left_rows(k, i) = w(j, i) / sigma[j];
      present[k] = true;
    }
  }
  complete_orthonormal(left_rows, present);

  return {left_rows.transpose(), std::move(singular), right_rows.transpose()};
}

void apply_sign_convention(SvdResult& s) {
  for (std::size_t k = 0; k < s.singular.size(); ++k) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t i = 0; i < s.left.rows(); ++i) {
      const double x = std::abs(s.left(i, k));
      if (x > best_abs) {
        best_abs = x;
        best = i;
      }
    }
    if (s.left(best, k) < 0.0) {
      for (std::size_t i = 0; i < s.left.rows(); ++i) s.left(i, k) = -s.left(i, k);
      for (std::size_t i = 0; i < s.right.rows(); ++i) s.right(i, k) = -s.right(i, k);
    }
  }
}

}  // namespace

QrResult qr_thin(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw ShapeError("qr_thin: needs rows >= cols, got " + std::to_string(m) + "x" + std::to_string(n));

  Matrix work = a;
  std::vector<std::vector<double>> reflectors(n);
  for (std::size_t k = 0; k < n; ++k) {
    double xnorm = 0.0;
    for (std::size_t i = k; i < m; ++i) xnorm += work(i, k) * work(i, k);
    xnorm = std::sqrt(xnorm);
    if (xnorm == 0.0) continue;
    const double alpha = work(k, k) > 0.0 ? -xnorm : xnorm;
    std::vector<double> v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = work(i, k);
    v[0] -= alpha;
    const double vnorm = norm2(v);
    if (vnorm == 0.0) continue;
    for (double& x : v) x /= vnorm;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * work(i, j);
      for (std::size_t i = k; i < m; ++i) work(i, j) -= 2.0 * s * v[i - k];
    }
    reflectors[k] = std::move(v);
  }

  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r(i, j) = work(i, j);

  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t kk = n; kk-- > 0;) {
    const auto& v = reflectors[kk];
    if (v.empty()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += v[i - kk] * q(i, j);
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= 2.0 * s * v[i - kk];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) {
      for (std::size_t j = 0; j < n; ++j) r(i, j) = -r(i, j);
      for (std::size_t k = 0; k < m; ++k) q(k, i) = -q(k, i);
    }
  }
  return {std::move(q), std::move(r)};
}

SvdResult svd_small(const Matrix& a) {
  const std::size_t k = std::min(a.rows(), a.cols());
  if (k > kSvdMaxDim)
    throw CapabilityError("svd_small: min dimension " + std::to_string(k) + " exceeds " + std::to_string(kSvdMaxDim));
  if (k == 0) return {Matrix(a.rows(), 0), {}, Matrix(a.cols(), 0)};

  SvdResult s;
  if (a.rows() >= a.cols()) {
    s = jacobi_tall(a);
  } else {
    SvdResult t = jacobi_tall(a.transpose());
    s = {std::move(t.right), std::move(t.singular), std::move(t.left)};
  }
  apply_sign_convention(s);
  return s;
}

std::vector<double> singular_values(const Matrix& a) { return svd_small(a).singular; }

Matrix reconstruct(const SvdResult& s) {
  Matrix scaled = s.left;
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (std::size_t k = 0; k < scaled.cols(); ++k) scaled(i, k) *= s.singular[k];
  return matmul_nt(scaled, s.right);
}

double condition_number(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("condition_number: matrix must be square");
  const auto sv = singular_values(a);
  if (sv.empty()) return 1.0;
  if (sv.back() == 0.0) return std::numeric_limits<double>::infinity();
  return sv.front() / sv.back();
}

Matrix inverse(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("inverse: matrix must be square");
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(work(i, col)) > std::abs(work(pivot, col))) pivot = i;
    if (work(pivot, col) == 0.0) throw NumericalError("inverse: matrix is singular");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(pivot, j), work(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const double d = work(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = work(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(i, j) -= f * work(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

Matrix procrustes(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("procrustes: matrix must be square");
  const SvdResult s = svd_small(m);
  return matmul_nt(s.left, s.right);
}

}  // namespace lol
