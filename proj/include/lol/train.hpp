// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lol/dataset.hpp"
#include "lol/featurizers.hpp"
#include "lol/glnet.hpp"
#include "lol/metrics.hpp"
#include "lol/mlp.hpp"

namespace lol {

enum class ModelMethod { flatten, o_align, svd, dense, glnet };
enum class LossKind { mse, bce_logits };

std::string_view to_string(ModelMethod method);
ModelMethod parse_model_method(std::string_view s);
/// Featurizer behind an MLP method; throws for glnet.
FeatureMethod feature_method_of(ModelMethod method);

/// Per-dimension z-scoring fit on the training split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& rows);
  void apply(Matrix& rows) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct ModelConfig {
  ModelMethod method = ModelMethod::glnet;
  std::size_t target_rank = 0;
  std::uint64_t template_seed = 0;
  std::size_t dense_cap = kDefaultDenseCap;
  std::vector<std::size_t> mlp_hidden = {256, 128};
  GlNetConfig glnet;
  /// Defaults to on for MLP methods and off for glnet.
  std::optional<bool> standardize;
};

/// A trained or freshly initialized predictor: either an MLP over a
/// featurization or a GL-net.
struct Model {
  ModelMethod method = ModelMethod::glnet;
  TaskDescriptor task;
  /// (n, m, r) of the training layers; o_align templates are regenerated from it.
  std::vector<std::array<std::size_t, 3>> layer_shapes;
  FeaturizerConfig featurizer;
  std::optional<Standardizer> standardizer;
  MlpParams mlp;
  GlNetParams glnet;

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Shapes come from the first item of `data`, output width from its task.
Model init_model(const ModelConfig& cfg, const TaskDataset& data, Rng& rng);

/// B × out predictions (raw logits for multilabel tasks).
Matrix predict(const Model& model, std::span<const LoraUpdate* const> xs);
Matrix predict(const Model& model, const TaskDataset& data);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mse;
};

/// Adaptive-moment optimizer with decoupled weight decay
/// (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
class Adam {
 public:
  Adam(double learning_rate, double weight_decay) : lr_(learning_rate), wd_(weight_decay) {}

  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_;
  double wd_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct LossValue {
  double value = 0.0;
  Matrix gradient;  ///< d value / d prediction
};

/// Mean over all entries; mse or numerically stable binary cross-entropy on logits.
LossValue compute_loss(const Matrix& predictions, const Matrix& labels, LossKind kind);

struct EpochLog {
  std::size_t epoch = 0;
  Split split = Split::train;
  double loss = 0.0;
  Metrics metrics;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Trains on the train split; logs full-pass train (and val, if present)
/// losses after every epoch. Parameters are rounded to float32 before the final
/// epoch is logged, so a saved checkpoint reproduces the last row exactly.
/// Throws NumericalError naming the epoch and batch on a non-finite loss.
TrainResult train(Model model, const TaskDataset& data, const TrainConfig& cfg);

/// Metrics of `model` over every item of `data`.
Metrics evaluate(const Model& model, const TaskDataset& data);

Matrix label_matrix(const TaskDataset& data);

/// CSV with header epoch,split,loss,mse,r2,kendall_tau,accuracy.
std::string log_to_csv(std::span<const EpochLog> log);

// LOLM checkpoint:
//   "LOLM" | u32 version=1 | u32 json_len | architecture JSON
//   | f32 parameter blobs in declaration order (standardizer mean, scale, then model tensors)
inline constexpr std::uint32_t kLolmVersion = 1;

std::vector<std::uint8_t> encode_lolm(const Model& model);
Model decode_lolm(std::span<const std::uint8_t> bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace lol
