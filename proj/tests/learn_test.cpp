// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "lol/errors.hpp"
#include "lol/metrics.hpp"
#include "lol/mlp.hpp"
#include "lol/train.hpp"
#include "test_support.hpp"

namespace lol {
namespace {

using testing::random_update;
using Shapes = std::vector<std::pair<std::size_t, std::size_t>>;

// ---------------------------------------------------------------- oracles

std::vector<double> oracle_forward(const MlpParams& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    std::vector<double> y(layer.weight.cols());
    for (std::size_t j = 0; j < y.size(); ++j) {
      double s = layer.bias[j];
      for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * layer.weight(i, j);
      y[j] = (l + 1 < p.layers.size()) ? std::max(s, 0.0) : s;
    }
    x = std::move(y);
  }
  return x;
}

/// All ordered pairs, counted directly.
double brute_tau(const std::vector<double>& a, const std::vector<double>& b) {
  double c = 0.0, d = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      if (s > 0) c += 1;
      if (s < 0) d += 1;
    }
  return (c - d) / static_cast<double>(n * (n - 1));
}

MlpParams random_mlp(std::vector<std::size_t> dims, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p = MlpParams::init(dims, rng);
  for (auto& l : p.layers)
    for (double& b : l.bias) b = 0.3 * rng.normal();
  return p;
}

// ---------------------------------------------------------------- MLP

TEST(Mlp, InitShapesAndScale) {
  Rng rng(1);
  const std::vector<std::size_t> dims{400, 300, 2};
  const MlpParams p = MlpParams::init(dims, rng);
  EXPECT_EQ(p.dims(), dims);
  EXPECT_EQ(p.input_dim(), 400u);
  EXPECT_EQ(p.output_dim(), 2u);
  double ss = 0.0;
  for (double w : p.layers[0].weight.data()) ss += w * w;
  EXPECT_NEAR(ss / (400.0 * 300.0), 1.0 / 400.0, 0.05 / 400.0);
  for (double b : p.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(Mlp, SingleIdentityLayerIsIdentity) {
  MlpParams p;
  p.layers.push_back({Matrix::identity(3), {0.0, 0.0, 0.0}});
  const std::vector<double> x{-1.0, 2.0, 0.5};
  EXPECT_EQ(mlp_forward(p, x), x);
}

TEST(Mlp, ZeroWeightsGiveLastBias) {
  MlpParams p = random_mlp({4, 6, 2}, 2);
  for (auto& l : p.layers) l.weight = Matrix(l.weight.rows(), l.weight.cols());
  const std::vector<double> x{1.0, -2.0, 3.0, 4.0};
  EXPECT_EQ(mlp_forward(p, x), p.layers.back().bias);
}

TEST(Mlp, MatchesLoopOracle) {
  const MlpParams p = random_mlp({5, 7, 6, 3}, 3);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.normal();
    const auto y = mlp_forward(p, x);
    const auto z = oracle_forward(p, x);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y[j], z[j], 1e-13);
  }
}

TEST(Mlp, BatchRowsMatchSingleForward) {
  const MlpParams p = random_mlp({5, 7, 3}, 4);
  Rng rng(4);
  const Matrix x = gaussian_matrix(9, 5, rng);
  const Matrix y = mlp_forward_batch(p, x);
  for (std::size_t b = 0; b < 9; ++b) {
    const auto yb = mlp_forward(p, x.row(b));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y(b, j), yb[j], 1e-14);
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  MlpParams p = random_mlp({5, 8, 6, 2}, 5);
  Rng rng(5);
  std::vector<double> x(5);
  for (double& v : x) v = rng.normal();
  const std::vector<double> up{0.4, -1.1};
  const MlpGradients g = mlp_backward(p, x, up);
  auto objective = [&] {
    const auto y = mlp_forward(p, x);
    return up[0] * y[0] + up[1] * y[1];
  };
  const double h = 1e-6;
  auto params = p.tensors();
  const auto grads = std::as_const(g.params).tensors();
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t k = 0; k < params[t].size(); ++k) {
      const double keep = params[t][k];
      params[t][k] = keep + h;
      const double fp = objective();
      params[t][k] = keep - h;
      const double fm = objective();
      params[t][k] = keep;
      EXPECT_NEAR(grads[t][k], (fp - fm) / (2 * h), 1e-6 * std::max(1.0, std::abs(grads[t][k])));
    }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = objective();
    x[i] = keep - h;
    const double fm = objective();
    x[i] = keep;
    EXPECT_NEAR(g.input(0, i), (fp - fm) / (2 * h), 1e-6);
  }
}

TEST(Mlp, InputWidthMismatchIsShapeError) {
  const MlpParams p = random_mlp({5, 3}, 6);
  EXPECT_THROW(mlp_forward(p, std::vector<double>(4)), ShapeError);
}

// ---------------------------------------------------------------- loss

TEST(Loss, MseAtPerfectPredictionHasZeroGradient) {
  const Matrix y = Matrix::from_rows({{1.0, 2.0}, {-3.0, 0.5}});
  const LossValue lv = compute_loss(y, y, LossKind::mse);
  EXPECT_EQ(lv.value, 0.0);
  for (double g : lv.gradient.data()) EXPECT_EQ(g, 0.0);
}

TEST(Loss, MseValueAndGradient) {
  const Matrix p = Matrix::from_rows({{1.0, 2.0}});
  const Matrix y = Matrix::from_rows({{0.0, 4.0}});
  const LossValue lv = compute_loss(p, y, LossKind::mse);
  EXPECT_DOUBLE_EQ(lv.value, 2.5);
  EXPECT_DOUBLE_EQ(lv.gradient(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(lv.gradient(0, 1), -2.0);
}

TEST(Loss, BceMatchesDirectFormulaAndFiniteDifferences) {
  const Matrix p = Matrix::from_rows({{0.3, -2.0, 5.0}});
  const Matrix y = Matrix::from_rows({{1.0, 0.0, 0.0}});
  const LossValue lv = compute_loss(p, y, LossKind::bce_logits);
  double direct = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double s = 1.0 / (1.0 + std::exp(-p(0, k)));
    direct -= y(0, k) * std::log(s) + (1 - y(0, k)) * std::log(1 - s);
  }
  EXPECT_NEAR(lv.value, direct / 3.0, 1e-12);
  for (std::size_t k = 0; k < 3; ++k) {
    Matrix a = p, b = p;
    a(0, k) += 1e-6;
    b(0, k) -= 1e-6;
    const double fd = (compute_loss(a, y, LossKind::bce_logits).value - compute_loss(b, y, LossKind::bce_logits).value) / 2e-6;
    EXPECT_NEAR(lv.gradient(0, k), fd, 1e-8);
  }
}

TEST(Loss, BceIsFiniteForExtremeLogits) {
  const Matrix p = Matrix::from_rows({{800.0, -800.0}});
  const Matrix y = Matrix::from_rows({{0.0, 1.0}});
  const LossValue lv = compute_loss(p, y, LossKind::bce_logits);
  EXPECT_NEAR(lv.value, 800.0, 1e-9);
  EXPECT_TRUE(all_finite(lv.gradient));
}

TEST(Loss, ShapeMismatchIsShapeError) {
  EXPECT_THROW(compute_loss(Matrix(2, 1), Matrix(1, 2), LossKind::mse), ShapeError);
}

// ---------------------------------------------------------------- optimizer

TEST(Adam, ZeroGradientWithoutDecayLeavesParameters) {
  std::vector<double> p{1.0, -2.0, 3.5};
  const std::vector<double> before = p;
  const std::vector<double> g(3, 0.0);
  Adam adam(0.1, 0.0);
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  for (int t = 0; t < 10; ++t) adam.step(ps, gs);
  EXPECT_EQ(p, before);
  EXPECT_EQ(adam.steps(), 10u);
}

TEST(Adam, DecoupledDecayShrinksGeometrically) {
  std::vector<double> p{1.0, -2.0, 3.5};
  const std::vector<double> before = p;
  const std::vector<double> g(3, 0.0);
  const double lr = 0.01, wd = 0.5;
  Adam adam(lr, wd);
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  for (int t = 0; t < 25; ++t) adam.step(ps, gs);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], before[i] * std::pow(1 - lr * wd, 25), 1e-13);
}

TEST(Adam, MatchesHandWrittenUpdate) {
  std::vector<double> p{0.5, -0.25};
  std::vector<double> q = p;
  const double lr = 0.05, wd = 0.1;
  Adam adam(lr, wd);
  double m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 6; ++t) {
    const std::vector<double> g{std::sin(t * 1.0) + p[0], 0.3 * t - p[1]};
    const std::vector<std::span<double>> ps{p};
    const std::vector<std::span<const double>> gs{g};
    adam.step(ps, gs);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      q[i] -= lr * (mh / (std::sqrt(vh) + 1e-8) + wd * q[i]);
    }
    EXPECT_NEAR(p[0], q[0], 1e-14);
    EXPECT_NEAR(p[1], q[1], 1e-14);
  }
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, PerfectPredictions) {
  const std::vector<double> y{0.1, 2.0, -1.0, 3.0};
  EXPECT_EQ(mean_squared_error(y, y), 0.0);
  EXPECT_DOUBLE_EQ(r2_score(y, y), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(y, y), 1.0);
}

TEST(Metrics, MeanPredictionHasZeroR2) {
  const std::vector<double> y{1.0, 2.0, 4.0, 9.0};
  const std::vector<double> p(4, 4.0);
  EXPECT_NEAR(r2_score(p, y), 0.0, 1e-15);
}

TEST(Metrics, TauOfOneSwapIsOneThird) {
  const std::vector<double> a{1, 3, 2}, b{1, 2, 3};
  EXPECT_NEAR(kendall_tau(a, b), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(kendall_tau(a, b), brute_tau(a, b), 1e-15);
}

TEST(Metrics, TauMatchesBruteForceWithTies) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(12), b(12);
    for (double& v : a) v = static_cast<double>(rng.below(5));
    for (double& v : b) v = static_cast<double>(rng.below(5));
    EXPECT_NEAR(kendall_tau(a, b), brute_tau(a, b), 1e-14);
  }
}

TEST(Metrics, ReversedOrderGivesMinusOne) {
  const std::vector<double> a{1, 2, 3, 4}, b{8, 6, 4, 2};
  EXPECT_DOUBLE_EQ(kendall_tau(a, b), -1.0);
}

TEST(Metrics, UndefinedCasesThrow) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(r2_score(one, one), UndefinedMetricError);
  EXPECT_THROW(kendall_tau(one, one), UndefinedMetricError);
  const std::vector<double> flat{2.0, 2.0, 2.0}, p{1.0, 2.0, 3.0};
  EXPECT_THROW(r2_score(p, flat), UndefinedMetricError);
}

TEST(Metrics, MultilabelAccuracy) {
  const std::vector<double> logits{2.0, -1.0, 0.5, -0.1};
  const std::vector<double> labels{1.0, 0.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(multilabel_accuracy(logits, labels), 0.5);
}

TEST(Metrics, InvariantUnderJointPermutation) {
  Rng rng(8);
  std::vector<double> p(30), y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    y[i] = rng.normal();
    p[i] = y[i] + 0.5 * rng.normal();
  }
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 29; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<double> pp(30), yp(30);
  for (std::size_t i = 0; i < 30; ++i) {
    pp[i] = p[perm[i]];
    yp[i] = y[perm[i]];
  }
  EXPECT_NEAR(mean_squared_error(p, y), mean_squared_error(pp, yp), 1e-14);
  EXPECT_NEAR(r2_score(p, y), r2_score(pp, yp), 1e-14);
  EXPECT_NEAR(kendall_tau(p, y), kendall_tau(pp, yp), 1e-14);
}

TEST(Metrics, ComputeMetricsFillsPerTaskKind) {
  const Matrix p = Matrix::from_rows({{-1.0, -1.0}, {2.0, 3.0}, {0.0, 1.0}});
  const Matrix y = Matrix::from_rows({{1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
  const Metrics reg = compute_metrics(p, y, TaskKind::regression);
  EXPECT_TRUE(reg.mse && reg.r2 && reg.kendall_tau);
  EXPECT_FALSE(reg.accuracy);
  const Metrics ml = compute_metrics(p, y, TaskKind::multilabel);
  ASSERT_TRUE(ml.accuracy && ml.mse);
  EXPECT_FALSE(ml.r2 || ml.kendall_tau);
  EXPECT_DOUBLE_EQ(*ml.accuracy, 5.0 / 6.0);
}

// ---------------------------------------------------------------- standardizer

TEST(Standardizer, FitGivesZeroMeanUnitVariance) {
  Rng rng(9);
  Matrix x = gaussian_matrix(50, 4, rng, 3.0);
  for (std::size_t i = 0; i < 50; ++i) x(i, 2) += 10.0;
  const Standardizer s = Standardizer::fit(x);
  s.apply(x);
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 50; ++i) m += x(i, j);
    m /= 50.0;
    for (std::size_t i = 0; i < 50; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 50.0, 1.0, 1e-12);
  }
}

TEST(Standardizer, ConstantColumnStaysFinite) {
  Matrix x(5, 2, 3.0);
  x(0, 1) = 1.0;
  const Standardizer s = Standardizer::fit(x);
  s.apply(x);
  EXPECT_TRUE(all_finite(x));
}

// ---------------------------------------------------------------- training

const Shapes kShapes{{6, 5}, {4, 7}};

TaskDataset regression_set(std::uint64_t seed, std::size_t count) {
  TaskDataset data;
  data.task = {TaskKind::regression, 1, "toy"};
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const LoraUpdate x = random_update(rng, kShapes, 2);
    double s = 0.0;
    for (const auto& l : x.layers()) s += frobenius_norm(testing::naive_product(l));
    const Split split = k % 5 == 4 ? Split::val : Split::train;
    data.items.push_back({x, {s / 10.0}, split});
  }
  return data;
}

Model fresh(const TaskDataset& data, ModelMethod method, std::uint64_t seed) {
  ModelConfig mc;
  mc.method = method;
  mc.mlp_hidden = {16};
  mc.glnet.hidden_width = 4;
  mc.glnet.head_hidden = {16};
  Rng rng(seed);
  return init_model(mc, data, rng);
}

void expect_same_tensors(const Model& a, const Model& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t t = 0; t < ta.size(); ++t)
    EXPECT_TRUE(std::equal(ta[t].begin(), ta[t].end(), tb[t].begin(), tb[t].end())) << "tensor " << t;
}

TEST(Train, ZeroLearningRateKeepsQuantizedInitialParameters) {
  const TaskDataset data = regression_set(10, 20);
  for (ModelMethod method : {ModelMethod::dense, ModelMethod::glnet}) {
    Model m = fresh(data, method, 11);
    TrainConfig tc;
    tc.epochs = 3;
    tc.learning_rate = 0.0;
    const TrainResult res = train(m, data, tc);
    for (auto t : m.tensors())
      for (double& v : t) v = static_cast<double>(static_cast<float>(v));
    expect_same_tensors(res.model, m);
  }
}

TEST(Train, SeparableToyReachesFullAccuracy) {
  TaskDataset data;
  data.task = {TaskKind::multilabel, 1, "toy"};
  const Matrix u = Matrix::from_rows({{1.0}, {0.5}, {-0.2}});
  const Matrix v = Matrix::from_rows({{1.0}, {2.0}});
  data.items.push_back({LoraUpdate({{"a", u, v}}), {1.0}, Split::train});
  data.items.push_back({LoraUpdate({{"a", u * -1.0, v}}), {0.0}, Split::train});
  for (ModelMethod method : {ModelMethod::flatten, ModelMethod::glnet}) {
    ModelConfig mc;
    mc.method = method;
    mc.mlp_hidden = {8};
    mc.glnet.hidden_width = 3;
    mc.glnet.head_hidden = {8};
    mc.standardize = method == ModelMethod::glnet ? std::optional<bool>(false) : std::nullopt;
    Rng rng(12);
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 2;
    tc.learning_rate = 1e-2;
    tc.loss = LossKind::bce_logits;
    const TrainResult res = train(init_model(mc, data, rng), data, tc);
    EXPECT_EQ(*evaluate(res.model, data).accuracy, 1.0) << to_string(method);
  }
}

TEST(Train, SameSeedIsBitIdentical) {
  const TaskDataset data = regression_set(13, 30);
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 7;
  tc.seed = 5;
  const TrainResult a = train(fresh(data, ModelMethod::glnet, 14), data, tc);
  const TrainResult b = train(fresh(data, ModelMethod::glnet, 14), data, tc);
  expect_same_tensors(a.model, b.model);
  EXPECT_EQ(log_to_csv(a.log), log_to_csv(b.log));
  tc.seed = 6;
  const TrainResult c = train(fresh(data, ModelMethod::glnet, 14), data, tc);
  EXPECT_NE(log_to_csv(a.log), log_to_csv(c.log));
}

TEST(Train, LogsTrainAndValRowsPerEpoch) {
  const TaskDataset data = regression_set(15, 20);
  TrainConfig tc;
  tc.epochs = 3;
  const TrainResult res = train(fresh(data, ModelMethod::svd, 16), data, tc);
  ASSERT_EQ(res.log.size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(res.log[k].epoch, k / 2 + 1);
    EXPECT_EQ(res.log[k].split, k % 2 == 0 ? Split::train : Split::val);
  }
  const std::string csv = log_to_csv(res.log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,split,loss,mse,r2,kendall_tau,accuracy");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Train, EvaluationOnTrainSplitMatchesLastLogRow) {
  const TaskDataset data = regression_set(17, 25);
  TrainConfig tc;
  tc.epochs = 5;
  for (ModelMethod method : {ModelMethod::dense, ModelMethod::glnet}) {
    const TrainResult res = train(fresh(data, method, 18), data, tc);
    const Metrics m = evaluate(res.model, data.subset(Split::train));
    const EpochLog& last = res.log[res.log.size() - 2];
    ASSERT_EQ(last.split, Split::train);
    EXPECT_EQ(*m.mse, last.loss) << to_string(method);
    EXPECT_EQ(*m.r2, *last.metrics.r2);
  }
}

TEST(Train, NonFiniteLossIsNumericalError) {
  TaskDataset data = regression_set(19, 10);
  data.items[0].label[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 2;
  try {
    train(fresh(data, ModelMethod::dense, 20), data, tc);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Train, BadConfigurationIsRejected) {
  const TaskDataset data = regression_set(21, 10);
  TrainConfig tc;
  tc.batch_size = 0;
  EXPECT_THROW(train(fresh(data, ModelMethod::dense, 22), data, tc), std::invalid_argument);
  ModelConfig mc;
  mc.method = ModelMethod::glnet;
  mc.standardize = true;
  Rng rng(22);
  EXPECT_THROW(init_model(mc, data, rng), std::invalid_argument);
}

TEST(Train, GlNetTrajectoryIgnoresTheGauge) {
  const TaskDataset canonical = regression_set(23, 24);
  TaskDataset scrambled = canonical;
  Rng g(24);
  for (auto& item : scrambled.items) {
    std::vector<Eigen::MatrixXd> rs;
    for (std::size_t r : item.update.ranks()) rs.push_back(testing::bounded_gl(g, r, 10.0));
    item.update = testing::eigen_act(item.update, rs);
  }
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 8;
  const TrainResult a = train(fresh(canonical, ModelMethod::glnet, 25), canonical, tc);
  const TrainResult b = train(fresh(scrambled, ModelMethod::glnet, 25), scrambled, tc);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_NEAR(a.log[k].loss, b.log[k].loss, 1e-6);
}

// ---------------------------------------------------------------- checkpoints

TEST(Checkpoint, RoundTripPreservesPredictions) {
  const TaskDataset data = regression_set(26, 15);
  TrainConfig tc;
  tc.epochs = 2;
  for (ModelMethod method : {ModelMethod::flatten, ModelMethod::o_align, ModelMethod::svd, ModelMethod::dense,
                             ModelMethod::glnet}) {
    const TrainResult res = train(fresh(data, method, 27), data, tc);
    const Model back = decode_lolm(encode_lolm(res.model));
    EXPECT_EQ(back.method, method);
    EXPECT_EQ(back.layer_shapes, res.model.layer_shapes);
    EXPECT_EQ(back.standardizer, res.model.standardizer);
    expect_same_tensors(back, res.model);
    EXPECT_EQ(predict(back, data), predict(res.model, data)) << to_string(method);
  }
}

TEST(Checkpoint, HeaderLayout) {
  const TaskDataset data = regression_set(28, 5);
  const auto bytes = encode_lolm(fresh(data, ModelMethod::glnet, 29));
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LOLM");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
}

TEST(Checkpoint, CorruptionIsParseError) {
  const TaskDataset data = regression_set(30, 5);
  const auto good = encode_lolm(fresh(data, ModelMethod::glnet, 31));
  auto kind_of = [](std::vector<std::uint8_t> bytes) {
    try {
      decode_lolm(bytes);
    } catch (const ParseError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return ParseError::Kind::bad_value;
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of(bad_magic), ParseError::Kind::bad_magic);
  auto version = good;
  version[4] = 2;
  EXPECT_EQ(kind_of(version), ParseError::Kind::version_mismatch);
  EXPECT_EQ(kind_of({good.begin(), good.end() - 3}), ParseError::Kind::truncated);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(kind_of(trailing), ParseError::Kind::bad_value);
}

TEST(Checkpoint, UnfitStandardizerIsRejected) {
  const TaskDataset data = regression_set(32, 5);
  EXPECT_THROW(encode_lolm(fresh(data, ModelMethod::dense, 33)), std::invalid_argument);
}

TEST(Checkpoint, SaveAndLoadFile) {
  const TaskDataset data = regression_set(34, 8);
  TrainConfig tc;
  tc.epochs = 1;
  const TrainResult res = train(fresh(data, ModelMethod::dense, 35), data, tc);
  const auto path = testing::scratch_dir("lolm") / "m.lolm";
  save_model(res.model, path);
  expect_same_tensors(load_model(path), res.model);
}

}  // namespace
}  // namespace lol
