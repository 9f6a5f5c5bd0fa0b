// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "lol/featurizers.hpp"
#include "lol/glnet.hpp"
#include "lol/mlp.hpp"
#include "lol/random.hpp"

namespace lol {

namespace {

constexpr std::size_t kHeadWidth = 16;
constexpr std::size_t kMaxForwardWeights = std::size_t{1} << 24;

volatile double g_sink = 0.0;

double seconds_per_call(const std::function<double()>& fn, double min_seconds) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::size_t calls = 0;
  double elapsed = 0.0;
  do {
    g_sink = g_sink + fn();
    ++calls;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < min_seconds);
  return elapsed / static_cast<double>(calls);
}

double median_time(const std::function<double()>& fn, std::size_t repeat, double min_seconds) {
  std::vector<double> t;
  for (std::size_t k = 0; k < repeat; ++k) t.push_back(seconds_per_call(fn, min_seconds));
  std::sort(t.begin(), t.end());
  return t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
}

double first(const std::vector<double>& v) { return v.empty() ? 0.0 : v.front(); }

}  // namespace

std::vector<BenchRow> run_bench(std::span<const std::size_t> sizes, std::size_t rank, std::size_t repeat,
                                std::uint64_t seed, double min_seconds) {
  if (sizes.empty()) throw std::invalid_argument("bench: no sizes");
  if (rank < 1) throw std::invalid_argument("bench: rank must be at least 1");
  if (repeat < 1) throw std::invalid_argument("bench: repeat must be at least 1");
  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    if (n < rank) throw std::invalid_argument("bench: size " + std::to_string(n) + " is below the rank");
    Rng rng = Rng(seed).split(n);
    const LoraUpdate x({{"layer0", gaussian_matrix(n, rank, rng), gaussian_matrix(n, rank, rng)}});
    const AlignTemplates tpl = AlignTemplates::generate_like(x, seed);

    const std::vector<std::pair<FeatureMethod, std::function<FeatureVector()>>> featurizers{
        {FeatureMethod::flatten, [&] { return featurize_flatten(x); }},
        {FeatureMethod::o_align, [&] { return featurize_o_align(x, tpl); }},
        {FeatureMethod::svd, [&] { return featurize_svd(x, rank); }},
        {FeatureMethod::dense, [&] { return featurize_dense(x, n * n); }},
    };
    for (const auto& [method, fn] : featurizers) {
      BenchRow row{n, n, rank, std::string(to_string(method)), 0.0, std::nullopt};
      row.preprocess_s = median_time([&] { return first(fn().values); }, repeat, min_seconds);
      const FeatureVector f = fn();
      if (f.values.size() * kHeadWidth <= kMaxForwardWeights) {
        const std::vector<std::size_t> dims{f.values.size(), kHeadWidth, 1};
        const MlpParams mlp = MlpParams::init(dims, rng);
        row.forward_s = median_time([&] { return first(mlp_forward(mlp, f)); }, repeat, min_seconds);
      }
      rows.push_back(std::move(row));
    }

    const std::pair<std::size_t, std::size_t> shape{n, n};
    const GlNetParams net = GlNetParams::init(std::span(&shape, 1), GlNetConfig{}, rng);
    BenchRow row{n, n, rank, "glnet", 0.0, std::nullopt};
    row.forward_s = median_time([&] { return first(glnet_forward(net, x)); }, repeat, min_seconds);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string bench_to_csv(std::span<const BenchRow> rows) {
  std::ostringstream os;
  os.precision(6);
  os << "n,m,rank,method,preprocess_s,forward_s\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.m << ',' << r.rank << ',' << r.method << ',' << r.preprocess_s << ',';
    if (r.forward_s) os << *r.forward_s;
    os << '\n';
  }
  return os.str();
}

}  // namespace lol
