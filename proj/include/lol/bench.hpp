// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lol {

struct BenchRow {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t rank = 0;
  std::string method;
  double preprocess_s = 0.0;           ///< median seconds per featurization
  std::optional<double> forward_s;     ///< median seconds per forward pass; empty when the model would not fit
};

/// One square single-layer update per size; every method is timed on it.
/// Each repetition loops until at least `min_seconds` have elapsed and reports
/// the mean; the row holds the median over `repeat` repetitions.
std::vector<BenchRow> run_bench(std::span<const std::size_t> sizes, std::size_t rank, std::size_t repeat,
                                std::uint64_t seed = 0, double min_seconds = 0.02);

/// n,m,rank,method,preprocess_s,forward_s
std::string bench_to_csv(std::span<const BenchRow> rows);

}  // namespace lol
