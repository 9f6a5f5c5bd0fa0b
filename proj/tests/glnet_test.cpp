// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <gtest/gtest.h>

#include <cmath>
#include <utility>

#include "lol/errors.hpp"
#include "lol/featurizers.hpp"
#include "lol/glnet.hpp"
#include "lol/mlp.hpp"
#include "lol/train.hpp"
#include "test_support.hpp"

namespace lol {
namespace {

using testing::eigen_act;
using testing::naive_matmul;
using testing::random_update;
using testing::relative_deviation;
using Shapes = std::vector<std::pair<std::size_t, std::size_t>>;

const Shapes kShapes{{10, 8}, {6, 9}};

LoraUpdate update(std::uint64_t seed, std::size_t r = 3) {
  Rng rng(seed);
  return random_update(rng, kShapes, r);
}

std::vector<Eigen::MatrixXd> eigen_gauge(Rng& rng, const LoraUpdate& x, double cond) {
  std::vector<Eigen::MatrixXd> rs;
  for (std::size_t r : x.ranks()) rs.push_back(testing::bounded_gl(rng, r, cond));
  return rs;
}

GlNetParams small_net(std::uint64_t seed, Nonlinearity nl, std::size_t stacks, std::size_t width = 5) {
  GlNetConfig cfg;
  cfg.hidden_width = width;
  cfg.stacks = stacks;
  cfg.nonlinearity = nl;
  cfg.head_hidden = {12, 7};
  cfg.output_dim = 2;
  Rng rng(seed);
  return GlNetParams::init(kShapes, cfg, rng);
}

double update_deviation(const LoraUpdate& a, const LoraUpdate& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.layer_count(); ++i) {
    d = std::max(d, relative_deviation(a.layer(i).u.data(), b.layer(i).u.data()));
    d = std::max(d, relative_deviation(a.layer(i).v.data(), b.layer(i).v.data()));
  }
  return d;
}

// ---------------------------------------------------------------- init

TEST(GlNetInit, ShapesChainAndProjectionsAreSemiOrthogonal) {
  const GlNetParams p = small_net(1, Nonlinearity::tanh_rowsum, 2);
  ASSERT_EQ(p.stacks.size(), 2u);
  EXPECT_EQ(p.stacks[0].phi[0].rows(), 5u);
  EXPECT_EQ(p.stacks[0].phi[0].cols(), 10u);
  EXPECT_EQ(p.stacks[0].psi[1].cols(), 9u);
  EXPECT_EQ(p.stacks[1].phi[1].cols(), 5u);
  EXPECT_EQ(p.head.input_dim(), 2u * 5u * 5u);
  EXPECT_EQ(p.head.output_dim(), 2u);
  const Matrix& phi = p.stacks[0].phi[0];
  EXPECT_LE(max_abs_diff(matmul_nt(phi, phi), Matrix::identity(5)), 1e-12);
}

TEST(GlNetInit, WideProjectionHasScaledOrthonormalColumns) {
  GlNetConfig cfg;
  cfg.hidden_width = 16;
  Rng rng(2);
  const GlNetParams p = GlNetParams::init(kShapes, cfg, rng);
  const Matrix& phi = p.stacks[0].phi[0];
  EXPECT_LE(max_abs_diff(matmul_tn(phi, phi), Matrix::identity(10) * (16.0 / 10.0)), 1e-12);
}

TEST(GlNetInit, DefaultsAreOneStackWidth32NoNonlinearity) {
  const GlNetConfig cfg;
  EXPECT_EQ(cfg.hidden_width, 32u);
  EXPECT_EQ(cfg.stacks, 1u);
  EXPECT_EQ(cfg.nonlinearity, Nonlinearity::none);
  EXPECT_EQ(cfg.head_hidden, (std::vector<std::size_t>{256, 128}));
  GlNetConfig zero;
  zero.stacks = 0;
  Rng rng(3);
  EXPECT_THROW(GlNetParams::init(kShapes, zero, rng), std::invalid_argument);
}

// ---------------------------------------------------------------- equivariant linear

TEST(EquivariantLinear, IdentityProjectionsAreIdentity) {
  const LoraUpdate x = update(4);
  EquivariantLayer id;
  for (const auto& l : x.layers()) {
    id.phi.push_back(Matrix::identity(l.n()));
    id.psi.push_back(Matrix::identity(l.m()));
  }
  EXPECT_EQ(equivariant_linear(id, x), x);
}

TEST(EquivariantLinear, MatchesMatmulOracle) {
  const LoraUpdate x = update(5);
  const GlNetParams p = small_net(5, Nonlinearity::none, 1);
  const LoraUpdate y = equivariant_linear(p.stacks[0], x);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(max_abs_diff(y.layer(i).u, naive_matmul(p.stacks[0].phi[i], x.layer(i).u)), 1e-13);
    EXPECT_LE(max_abs_diff(y.layer(i).v, naive_matmul(p.stacks[0].psi[i], x.layer(i).v)), 1e-13);
    EXPECT_EQ(y.layer(i).rank(), x.layer(i).rank());
  }
}

TEST(EquivariantLinear, IsEquivariant) {
  Rng rng(6);
  const GlNetParams p = small_net(6, Nonlinearity::none, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const LoraUpdate x = update(100 + trial);
    const auto rs = eigen_gauge(rng, x, 1e3);
    const LoraUpdate lhs = equivariant_linear(p.stacks[0], eigen_act(x, rs));
    const LoraUpdate rhs = eigen_act(equivariant_linear(p.stacks[0], x), rs);
    EXPECT_LE(update_deviation(rhs, lhs), 1e-9);
  }
}

TEST(EquivariantLinear, ShapeMismatchIsShapeError) {
  const GlNetParams p = small_net(7, Nonlinearity::none, 1);
  Rng rng(7);
  const Shapes other{{11, 8}, {6, 9}};
  EXPECT_THROW(equivariant_linear(p.stacks[0], random_update(rng, other, 3)), ShapeError);
}

TEST(EquivariantLinear, CompositionIsClosed) {
  const LoraUpdate x = update(8);
  const GlNetParams p = small_net(8, Nonlinearity::none, 2);
  EquivariantLayer fused;
  for (std::size_t i = 0; i < 2; ++i) {
    fused.phi.push_back(matmul(p.stacks[1].phi[i], p.stacks[0].phi[i]));
    fused.psi.push_back(matmul(p.stacks[1].psi[i], p.stacks[0].psi[i]));
  }
  const LoraUpdate two = equivariant_linear(p.stacks[1], equivariant_linear(p.stacks[0], x));
  const LoraUpdate one = equivariant_linear(fused, x);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(max_abs_diff(two.layer(i).u, one.layer(i).u), 1e-10);
    EXPECT_LE(max_abs_diff(two.layer(i).v, one.layer(i).v), 1e-10);
  }
}

// ---------------------------------------------------------------- nonlinearity

TEST(Nonlinearity, AllPositiveFactorsPassReluSign) {
  Rng rng(9);
  std::vector<LoraLayer> layers;
  for (const auto& [n, m] : kShapes) {
    Matrix u = gaussian_matrix(n, 3, rng), v = gaussian_matrix(m, 3, rng);
    for (double& e : u.data()) e = std::abs(e) + 0.1;
    for (double& e : v.data()) e = std::abs(e) + 0.1;
    layers.push_back({"l" + std::to_string(n), u, v});
  }
  const LoraUpdate x(layers);
  EXPECT_EQ(equivariant_nonlinearity(x, Nonlinearity::relu_sign), x);
}

TEST(Nonlinearity, NegativeRowSumZeroesRow) {
  const Matrix u = Matrix::from_rows({{1.0}, {-2.0}, {0.5}});
  const Matrix v = Matrix::from_rows({{1.0}, {1.0}});
  const LoraUpdate y = equivariant_nonlinearity(LoraUpdate({{"a", u, v}}), Nonlinearity::relu_sign);
  EXPECT_EQ(y.layer(0).u, Matrix::from_rows({{1.0}, {0.0}, {0.5}}));
  // Column sums of UVᵀ are both −0.5, so every row of V is gated off.
  EXPECT_EQ(y.layer(0).v, Matrix(2, 1));
}

TEST(Nonlinearity, TanhScalesByRowSums) {
  const LoraUpdate x = update(10);
  const LoraUpdate y = equivariant_nonlinearity(x, Nonlinearity::tanh_rowsum);
  for (std::size_t i = 0; i < 2; ++i) {
    const Matrix p = testing::naive_product(x.layer(i));
    for (std::size_t row = 0; row < p.rows(); ++row) {
      double s = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) s += p(row, c);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(y.layer(i).u(row, k), std::tanh(s) * x.layer(i).u(row, k), 1e-12);
    }
    for (std::size_t col = 0; col < p.cols(); ++col) {
      double s = 0.0;
      for (std::size_t row = 0; row < p.rows(); ++row) s += p(row, col);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(y.layer(i).v(col, k), std::tanh(s) * x.layer(i).v(col, k), 1e-12);
    }
  }
}

TEST(Nonlinearity, NoneIsIdentity) {
  const LoraUpdate x = update(11);
  EXPECT_EQ(equivariant_nonlinearity(x, Nonlinearity::none), x);
}

TEST(Nonlinearity, ReluSignRowsAreZeroOrUnchanged) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LoraUpdate x = update(200 + seed);
    const LoraUpdate y = equivariant_nonlinearity(x, Nonlinearity::relu_sign);
    for (std::size_t i = 0; i < 2; ++i)
      for (const auto& [a, b] : {std::pair{&x.layer(i).u, &y.layer(i).u}, std::pair{&x.layer(i).v, &y.layer(i).v}})
        for (std::size_t row = 0; row < a->rows(); ++row) {
          bool zero = true, same = true;
          for (std::size_t k = 0; k < a->cols(); ++k) {
            zero = zero && (*b)(row, k) == 0.0;
            same = same && (*b)(row, k) == (*a)(row, k);
          }
          EXPECT_TRUE(zero || same);
        }
  }
}

TEST(Nonlinearity, BothKindsAreEquivariant) {
  Rng rng(12);
  for (Nonlinearity nl : {Nonlinearity::relu_sign, Nonlinearity::tanh_rowsum}) {
    for (int trial = 0; trial < 50; ++trial) {
      Rng xr(300 + trial);
      const LoraUpdate x = random_update(xr, kShapes, 3, 0.4);
      const auto rs = eigen_gauge(rng, x, 1e3);
      const LoraUpdate lhs = equivariant_nonlinearity(eigen_act(x, rs), nl);
      const LoraUpdate rhs = eigen_act(equivariant_nonlinearity(x, nl), rs);
      EXPECT_LE(update_deviation(rhs, lhs), 1e-9) << to_string(nl);
    }
  }
}

TEST(Nonlinearity, NamesRoundTrip) {
  for (Nonlinearity nl : {Nonlinearity::none, Nonlinearity::relu_sign, Nonlinearity::tanh_rowsum})
    EXPECT_EQ(parse_nonlinearity(to_string(nl)), nl);
  EXPECT_THROW(parse_nonlinearity("gelu"), std::invalid_argument);
}

// ---------------------------------------------------------------- head

TEST(InvariantHead, IdentityMlpOnScalarProduct) {
  const LoraUpdate x({{"a", Matrix::from_rows({{2.0, -1.0}}), Matrix::from_rows({{3.0, 4.0}})}});
  MlpParams id;
  id.layers.push_back({Matrix::identity(1), {0.0}});
  const auto y = invariant_head(x, id);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 2.0);
}

TEST(InvariantHead, EqualsDenseFeaturesThroughMlp) {
  const LoraUpdate x = update(13);
  const std::vector<std::size_t> dims{10 * 8 + 6 * 9, 9, 2};
  Rng rng(13);
  const MlpParams mlp = MlpParams::init(dims, rng);
  EXPECT_LE(relative_deviation(mlp_forward(mlp, featurize_dense(x)), invariant_head(x, mlp)), 1e-14);
  EXPECT_EQ(head_features(x, 1 << 16), featurize_dense(x).values);
}

TEST(InvariantHead, IsGlInvariant) {
  Rng rng(14);
  const std::vector<std::size_t> dims{10 * 8 + 6 * 9, 9, 2};
  const MlpParams mlp = MlpParams::init(dims, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const LoraUpdate x = update(400 + trial);
    const auto a = invariant_head(x, mlp);
    const auto b = invariant_head(eigen_act(x, eigen_gauge(rng, x, 1e3)), mlp);
    EXPECT_LE(testing::max_abs_span_diff(a, b), 1e-7 * std::max(1.0, testing::max_abs_span(a)));
  }
}

TEST(InvariantHead, ProductCapIsCapabilityError) {
  const LoraUpdate x = update(15);
  EXPECT_THROW(head_features(x, 60), CapabilityError);
}

// ---------------------------------------------------------------- forward

TEST(GlNetForward, ZeroParametersGiveConstantBiasPath) {
  GlNetParams p = small_net(16, Nonlinearity::none, 1);
  for (auto t : p.tensors()) std::fill(t.begin(), t.end(), 0.0);
  auto& last = p.head.layers.back().bias;
  last = {0.75, -1.5};
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_EQ(glnet_forward(p, update(500 + seed)), last);
}

TEST(GlNetForward, SingleStackEqualsHeadAfterLinear) {
  const GlNetParams p = small_net(17, Nonlinearity::none, 1);
  const LoraUpdate x = update(17);
  EXPECT_EQ(glnet_forward(p, x), invariant_head(equivariant_linear(p.stacks[0], x), p.head));
}

TEST(GlNetForward, NonlinearityOnlyBetweenStacks) {
  const GlNetParams p = small_net(18, Nonlinearity::tanh_rowsum, 2);
  const LoraUpdate x = update(18);
  const LoraUpdate h = equivariant_linear(
      p.stacks[1], equivariant_nonlinearity(equivariant_linear(p.stacks[0], x), Nonlinearity::tanh_rowsum));
  EXPECT_EQ(glnet_features(p, x), h);
  EXPECT_EQ(glnet_forward(p, x), invariant_head(h, p.head));
}

TEST(GlNetForward, InvariantOnRandomPairs) {
  Rng rng(19);
  for (Nonlinearity nl : {Nonlinearity::none, Nonlinearity::relu_sign, Nonlinearity::tanh_rowsum}) {
    const GlNetParams p = small_net(19, nl, nl == Nonlinearity::none ? 1 : 2);
    for (int trial = 0; trial < 100; ++trial) {
      const LoraUpdate x = update(600 + trial);
      const auto a = glnet_forward(p, x);
      const auto b = glnet_forward(p, eigen_act(x, eigen_gauge(rng, x, 1e3)));
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE(std::abs(a[k] - b[k]), 1e-6 * (1 + std::abs(a[k])));
    }
  }
}

TEST(GlNetForward, BatchMatchesPerItem) {
  const GlNetParams p = small_net(20, Nonlinearity::tanh_rowsum, 2);
  std::vector<LoraUpdate> xs;
  for (std::uint64_t k = 0; k < 7; ++k) xs.push_back(update(700 + k));
  std::vector<const LoraUpdate*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  const Matrix out = glnet_forward_batch(p, ptrs);
  ASSERT_EQ(out.rows(), 7u);
  for (std::size_t k = 0; k < 7; ++k) {
    const auto y = glnet_forward(p, xs[k]);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(k, j), y[j], 1e-13);
  }
}

// ---------------------------------------------------------------- backward

TEST(GlNetBackward, ZeroUpstreamGivesZeroGradients) {
  const GlNetParams p = small_net(21, Nonlinearity::tanh_rowsum, 2);
  const GlNetParams g = glnet_backward(p, update(21), std::vector<double>{0.0, 0.0});
  for (auto t : g.tensors())
    for (double v : t) EXPECT_EQ(v, 0.0);
}

void fd_check(Nonlinearity nl, std::size_t stacks, std::uint64_t seed) {
  GlNetParams p = small_net(seed, nl, stacks, 4);
  Rng xr(seed + 1);
  const LoraUpdate x = random_update(xr, kShapes, 2, 0.6);
  const std::vector<double> up{0.7, -1.3};
  const GlNetParams g = glnet_backward(p, x, up);
  const auto base = glnet_activation_pattern(p, x);
  auto objective = [&]() {
    const auto y = glnet_forward(p, x);
    return up[0] * y[0] + up[1] * y[1];
  };
  const double h = 1e-5;
  auto params = p.tensors();
  const auto grads = g.tensors();
  std::size_t checked = 0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t k = 0; k < params[t].size(); ++k) {
      const double keep = params[t][k];
      params[t][k] = keep + h;
      const double fp = objective();
      const bool same_p = glnet_activation_pattern(p, x) == base;
      params[t][k] = keep - h;
      const double fm = objective();
      const bool same_m = glnet_activation_pattern(p, x) == base;
      params[t][k] = keep;
      if (!same_p || !same_m) continue;
      const double fd = (fp - fm) / (2 * h);
      const double a = grads[t][k];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      EXPECT_LE(rel, 1e-4) << to_string(nl) << " tensor " << t << " entry " << k;
      ++checked;
    }
  EXPECT_GT(checked, 0u);
}

TEST(GlNetBackward, MatchesFiniteDifferencesWithoutNonlinearity) { fd_check(Nonlinearity::none, 1, 22); }
TEST(GlNetBackward, MatchesFiniteDifferencesTanh) { fd_check(Nonlinearity::tanh_rowsum, 2, 23); }
TEST(GlNetBackward, MatchesFiniteDifferencesReluSign) { fd_check(Nonlinearity::relu_sign, 2, 24); }

TEST(GlNetBackward, BatchIsSumOfItems) {
  const GlNetParams p = small_net(25, Nonlinearity::tanh_rowsum, 2);
  std::vector<LoraUpdate> xs;
  for (std::uint64_t k = 0; k < 5; ++k) xs.push_back(update(800 + k));
  std::vector<const LoraUpdate*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  Matrix up(5, 2);
  for (std::size_t k = 0; k < 5; ++k) {
    up(k, 0) = 0.1 * static_cast<double>(k);
    up(k, 1) = -0.3;
  }
  const GlNetParams batch = glnet_backward_batch(p, ptrs, up);
  GlNetParams sum = GlNetParams::zeros_like(p);
  for (std::size_t k = 0; k < 5; ++k) {
    const GlNetParams g = glnet_backward(p, xs[k], up.row(k));
    auto dst = sum.tensors();
    const auto src = g.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t)
      for (std::size_t e = 0; e < dst[t].size(); ++e) dst[t][e] += src[t][e];
  }
  const auto a = batch.tensors();
  const auto b = std::as_const(sum).tensors();
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_LE(testing::max_abs_span_diff(a[t], b[t]), 1e-10);
}

// ---------------------------------------------------------------- universality smoke

TEST(GlNetTraining, FitsAContinuousFunctionOfTheProduct) {
  TaskDataset data;
  data.task = {TaskKind::regression, 1, "smooth"};
  const Shapes shapes{{6, 5}};
  Rng rng(26);
  for (int k = 0; k < 64; ++k) {
    const LoraUpdate x = random_update(rng, shapes, 2, 0.7);
    const Matrix p = testing::naive_product(x.layer(0));
    const double target = std::sin(p(0, 0)) + 0.5 * p(1, 2) * p(3, 4);
    data.items.push_back({x, {target}, Split::train});
  }
  ModelConfig mc;
  mc.method = ModelMethod::glnet;
  mc.glnet.hidden_width = 6;
  mc.glnet.head_hidden = {64, 64};
  Rng init(27);
  const Model model = init_model(mc, data, init);
  TrainConfig tc;
  tc.epochs = 600;
  tc.batch_size = 16;
  tc.learning_rate = 3e-3;
  tc.seed = 28;
  const TrainResult res = train(model, data, tc);
  EXPECT_LE(*evaluate(res.model, data).mse, 1e-3);
}

}  // namespace
}  // namespace lol
