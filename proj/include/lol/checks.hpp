// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

// Randomized property suites behind `lol check`.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lol {

struct PropertyResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t excluded = 0;   ///< degenerate or kink-crossing draws left out
  double max_deviation = 0.0;
  double min_deviation = 0.0;
  double tol = 0.0;
  /// Witness properties must exceed `tol`; they pass when the deviation does.
  bool expected_fail = false;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<PropertyResult> properties;

  bool pass() const;
  /// {"suite", "seed", "pass", "properties": [{name, trials, excluded, max_deviation,
  ///  min_deviation, tol, expected_fail, pass}]}
  std::string to_json() const;
};

struct CheckOptions {
  std::size_t trials = 100;
  /// Unset means the suite default: invariance 1e-6, equivariance 1e-9,
  /// gradients 1e-4, oracles 1e-9.
  std::optional<double> tol;
  std::uint64_t seed = 0;
  bool identity_gauge = false;  ///< equivariance only: use g = identity
};

/// svd/dense features and GL-net outputs under random GL(r) gauges with
/// cond ≤ 1e3 (L=2, n=m=64, r=4); O-Align under orthogonal gauges; flatten and
/// O-Align reported as expected-fail witnesses.
SuiteReport check_invariance(const CheckOptions& opt);

/// Layer-wise f(act(x,g)) = act(f(x),g) for the linear layer and both
/// nonlinearities.
SuiteReport check_equivariance(const CheckOptions& opt);

/// Central differences (h = 1e-5) against analytic gradients on every
/// parameter of small GL-nets and two-layer MLPs.
SuiteReport check_gradients(const CheckOptions& opt);

/// Numerical kernels against independent references: factored singular
/// values vs the dense product, Procrustes vs sampled rotations, thin QR
/// reconstruction and gauge recovery.
SuiteReport check_oracles(const CheckOptions& opt);

SuiteReport run_suite(const std::string& suite, const CheckOptions& opt);

}  // namespace lol
