// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lol/container.hpp"
#include "lol/errors.hpp"
#include "lol/parallel.hpp"
#include "lol/random.hpp"

namespace lol {

namespace {

constexpr std::uint64_t kProbeStream = 0x50524F4245ULL;
constexpr std::uint64_t kSplitBase[3] = {0x10000000ULL, 0x20000000ULL, 0x30000000ULL};

enum ItemStream : std::uint64_t { scale_stream = 0, factor_stream = 1, gauge_stream = 2, noise_stream = 3 };

Split split_of(std::size_t i, std::size_t count) {
  const std::size_t n_train = count * 7 / 10;
  const std::size_t n_val = count / 10;
  if (i < n_train) return Split::train;
  if (i < n_train + n_val) return Split::val;
  return Split::test;
}

std::size_t split_start(Split s, std::size_t count) {
  switch (s) {
    case Split::train: return 0;
    case Split::val: return count * 7 / 10;
    case Split::test: return count * 7 / 10 + count / 10;
  }
  return 0;
}

using Probes = std::vector<std::pair<std::vector<double>, std::vector<double>>>;

std::vector<double> probe_margins(const Probes& probes, const LoraUpdate& x) {
  const auto& layer = x.layer(0);
  std::vector<double> out;
  for (const auto& [a, b] : probes) {
    const auto ua = matvec_t(layer.u, a);
    const auto vb = matvec_t(layer.v, b);
    double s = 0.0;
    for (std::size_t k = 0; k < ua.size(); ++k) s += ua[k] * vb[k];
    out.push_back(s);
  }
  return out;
}

std::vector<double> teacher_impl(const SynthTaskSpec& spec, const Probes& probes, const LoraUpdate& x) {
  switch (spec.teacher) {
    case Teacher::frobenius_of_product: {
      double sq = 0.0, entries = 0.0;
      for (const auto& layer : x.layers()) {
        const double f = frobenius_norm(dense_product(layer));
        sq += f * f;
        entries += static_cast<double>(layer.n() * layer.m());
      }
      return {std::sqrt(sq / entries)};
    }
    case Teacher::rowsum_tanh_score: {
      double s = 0.0;
      for (const auto& layer : x.layers()) {
        const std::vector<double> ones(layer.m(), 1.0);
        const auto rows = matvec(layer.u, matvec_t(layer.v, ones));
        double acc = 0.0;
        for (double r : rows) {
          const double t = std::tanh(r / std::sqrt(static_cast<double>(layer.m())));
          acc += t * t;
        }
        s += acc / static_cast<double>(layer.n());
      }
      return {s / static_cast<double>(x.layer_count())};
    }
    case Teacher::planted_multilabel: {
      auto m = probe_margins(probes, x);
      for (double& v : m) v = v > 0.0 ? 1.0 : 0.0;
      return m;
    }
  }
  return {};
}

LoraUpdate draw_update(const SynthTaskSpec& spec, std::size_t rank, const Rng& item) {
  Rng scale_rng = item.split(scale_stream);
  Rng factor_rng = item.split(factor_stream);
  std::vector<LoraLayer> layers;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto [n, m] = spec.layers[i];
    const double s = std::exp(scale_rng.uniform(std::log(0.25), std::log(4.0)));
    const double stddev = std::sqrt(s) * std::pow(static_cast<double>(rank), -0.25);
    for (;;) {
      LoraLayer layer{"layer" + std::to_string(i), quantize_f32(gaussian_matrix(n, rank, factor_rng, stddev)),
                      quantize_f32(gaussian_matrix(m, rank, factor_rng, stddev))};
      LoraUpdate probe({layer});
      if (is_full_rank(probe)) {
        layers.push_back(std::move(layer));
        break;
      }
    }
  }
  return LoraUpdate(std::move(layers));
}

bool scrambles(GaugePolicy policy, Split split) {
  switch (policy) {
    case GaugePolicy::canonical: return false;
    case GaugePolicy::scrambled_train_and_test: return true;
    case GaugePolicy::canonical_train_scrambled_test: return split == Split::test;
  }
  return false;
}

std::string task_name(const SynthTaskSpec& spec) { return "synth-" + std::string(to_string(spec.teacher)); }

}  // namespace

std::string_view to_string(Teacher teacher) {
  switch (teacher) {
    case Teacher::frobenius_of_product: return "frobenius";
    case Teacher::rowsum_tanh_score: return "rowsum";
    case Teacher::planted_multilabel: return "multilabel";
  }
  return "frobenius";
}

std::string_view to_string(GaugePolicy policy) {
  switch (policy) {
    case GaugePolicy::canonical: return "canonical";
    case GaugePolicy::scrambled_train_and_test: return "scrambled";
    case GaugePolicy::canonical_train_scrambled_test: return "train-canonical-test-scrambled";
  }
  return "canonical";
}

Teacher parse_teacher(std::string_view s) {
  if (s == "frobenius") return Teacher::frobenius_of_product;
  if (s == "rowsum") return Teacher::rowsum_tanh_score;
  if (s == "multilabel") return Teacher::planted_multilabel;
  throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected frobenius, rowsum or multilabel)");
}

GaugePolicy parse_gauge_policy(std::string_view s) {
  if (s == "canonical") return GaugePolicy::canonical;
  if (s == "scrambled") return GaugePolicy::scrambled_train_and_test;
  if (s == "train-canonical-test-scrambled") return GaugePolicy::canonical_train_scrambled_test;
  throw std::invalid_argument("unknown gauge policy '" + std::string(s) + "'");
}

void SynthTaskSpec::validate() const {
  if (count < 4) throw std::invalid_argument("synth: count must be at least 4");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("synth: noise_std must be non-negative");
  if (rank < 1) throw std::invalid_argument("synth: rank must be at least 1");
  if (layers.empty()) throw std::invalid_argument("synth: need at least one layer");
  for (const auto& [n, m] : layers)
    if (n < rank || m < rank)
      throw std::invalid_argument("synth: layer " + std::to_string(n) + "x" + std::to_string(m) +
                                  " cannot hold rank " + std::to_string(rank));
  if (teacher == Teacher::planted_multilabel && probes < 1)
    throw std::invalid_argument("synth: planted_multilabel needs at least one probe");
  if (!(gauge_cond > 1.0)) throw std::invalid_argument("synth: gauge_cond must exceed 1");
}

std::pair<double, double> teacher_range(Teacher teacher) {
  switch (teacher) {
    case Teacher::frobenius_of_product: return {0.0, 8.0};
    case Teacher::rowsum_tanh_score: return {0.0, 1.0};
    case Teacher::planted_multilabel: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

Probes planted_probes(const SynthTaskSpec& spec) {
  Probes out;
  if (spec.layers.empty()) return out;
  Rng rng = Rng(spec.seed).split(kProbeStream);
  const auto [n, m] = spec.layers.front();
  for (std::size_t k = 0; k < spec.probes; ++k) {
    std::vector<double> a(n), b(m);
    for (double& v : a) v = rng.normal() / std::sqrt(static_cast<double>(n));
    for (double& v : b) v = rng.normal() / std::sqrt(static_cast<double>(m));
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

std::vector<double> teacher_value(const SynthTaskSpec& spec, const LoraUpdate& x) {
  const Probes probes = spec.teacher == Teacher::planted_multilabel ? planted_probes(spec) : Probes{};
  return teacher_impl(spec, probes, x);
}

TaskDataset generate(const SynthTaskSpec& spec) {
  spec.validate();
  TaskDataset data;
  data.task.name = task_name(spec);
  const bool multilabel = spec.teacher == Teacher::planted_multilabel;
  data.task.kind = multilabel ? TaskKind::multilabel : TaskKind::regression;
  data.task.label_dim = multilabel ? spec.probes : 1;
  const Probes probes = multilabel ? planted_probes(spec) : Probes{};
  const Rng root(spec.seed);

  data.items.resize(spec.count);
  parallel_for(spec.count, [&](std::size_t i) {
    const Split split = split_of(i, spec.count);
    const std::size_t local = i - split_start(split, spec.count);
    const Rng item = root.split(kSplitBase[static_cast<int>(split)] + local);
    LoraUpdate x = draw_update(spec, spec.rank, item);

    Rng noise = item.split(noise_stream);
    std::vector<double> label;
    std::vector<double> clean;
    if (multilabel) {
      clean = probe_margins(probes, x);
      for (double c : clean) label.push_back(c + spec.noise_std * noise.normal() > 0.0 ? 1.0 : 0.0);
    } else {
      clean = teacher_impl(spec, probes, x);
      for (double c : clean) label.push_back(c + spec.noise_std * noise.normal());
    }

    if (scrambles(spec.gauge_policy, split)) {
      Rng gauge = item.split(gauge_stream);
      const LoraUpdate y = act(x, GroupElement::random(x.ranks(), spec.gauge_cond, gauge));
      const std::vector<double> again = multilabel ? probe_margins(probes, y) : teacher_impl(spec, probes, y);
      for (std::size_t k = 0; k < clean.size(); ++k) {
        const double tol = 1e-8 * std::max(1.0, std::abs(clean[k]));
        const bool sign_flip = multilabel && (again[k] > 0.0) != (clean[k] > 0.0) && std::abs(clean[k]) > tol;
        if (std::abs(again[k] - clean[k]) > tol || sign_flip)
          throw NumericalError("synth: scrambling item " + std::to_string(i) + " changed its label");
      }
      x = quantize_f32(y);
    }
    data.items[i] = DatasetItem{std::move(x), std::move(label), split};
  });
  return data;
}

std::vector<TaskDataset> generate_rank_sweep(const SynthTaskSpec& base, std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("generate_rank_sweep: no ranks");
  std::vector<TaskDataset> out;
  for (std::size_t r : ranks) {
    SynthTaskSpec spec = base;
    spec.rank = r;
    TaskDataset d = generate(spec);
    if (ranks.size() > 1) d.task.name += "-rank-gen-r" + std::to_string(r);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace lol
