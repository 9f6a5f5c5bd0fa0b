// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lol/errors.hpp"
#include "lol/linalg.hpp"

namespace lol {

namespace {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

Rng::Rng(std::uint64_t seed) noexcept : key_(mix64(seed + kGolden)) {}

Rng Rng::split(std::uint64_t stream) const noexcept {
  return Rng(mix64(key_ ^ mix64(stream + 0x632BE59BD9B4E019ULL)), 0);
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t c = counter_++;
  return mix64(key_ + mix64(c * kGolden + 1));
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = stddev * rng.normal();
  return m;
}

Matrix random_gl(std::size_t r, double cond_bound, Rng& rng) {
  if (r < 1) throw std::invalid_argument("random_gl: rank must be >= 1");
  if (!(cond_bound > 1.0)) throw std::invalid_argument("random_gl: cond_bound must exceed 1");
  for (;;) {
    Matrix g = gaussian_matrix(r, r, rng);
    const double c = condition_number(g);
    if (std::isfinite(c) && c <= cond_bound) return g;
  }
}

Matrix random_gl(std::size_t r, double cond_bound, std::uint64_t seed) {
  Rng rng(seed);
  return random_gl(r, cond_bound, rng);
}

Matrix random_orthogonal(std::size_t r, Rng& rng) {
  if (r < 1) throw std::invalid_argument("random_orthogonal: rank must be >= 1");
  for (;;) {
    auto [q, rr] = qr_thin(gaussian_matrix(r, r, rng));
    bool full = true;
    for (std::size_t i = 0; i < r; ++i) full = full && rr(i, i) > 0.0;
    if (full) return q;
  }
}

Matrix random_orthogonal(std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  return random_orthogonal(r, rng);
}

}  // namespace lol
