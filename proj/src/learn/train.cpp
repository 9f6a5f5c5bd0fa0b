// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lol/errors.hpp"
#include "lol/parallel.hpp"

namespace lol {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

std::vector<const LoraUpdate*> updates_of(const TaskDataset& data, std::optional<Split> split = std::nullopt) {
  std::vector<const LoraUpdate*> out;
  for (const auto& item : data.items)
    if (!split || item.split == *split) out.push_back(&item.update);
  return out;
}

Matrix labels_of(const TaskDataset& data, std::optional<Split> split = std::nullopt) {
  std::vector<double> flat;
  std::size_t rows = 0;
  for (const auto& item : data.items) {
    if (split && item.split != *split) continue;
    flat.insert(flat.end(), item.label.begin(), item.label.end());
    ++rows;
  }
  return Matrix(rows, data.task.label_dim, std::move(flat));
}

/// Raw (unstandardized) feature rows of an MLP model.
Matrix feature_rows(const Model& model, std::span<const LoraUpdate* const> xs) {
  std::vector<FeatureVector> feats(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { feats[i] = featurize(model.featurizer, *xs[i]); });
  const std::size_t dim = model.mlp.input_dim();
  Matrix out(xs.size(), dim);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (feats[i].values.size() != dim)
      throw ShapeError("model expects " + std::to_string(dim) + " features, item " + std::to_string(i) + " has " +
                       std::to_string(feats[i].values.size()));
    std::copy(feats[i].values.begin(), feats[i].values.end(), out.row(i).begin());
  }
  return out;
}

void quantize_in_place(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t b = 0; b < idx.size(); ++b) std::copy(m.row(idx[b]).begin(), m.row(idx[b]).end(), out.row(b).begin());
  return out;
}

std::vector<std::span<const double>> as_const(const std::vector<std::span<double>>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

std::string_view to_string(ModelMethod method) {
  switch (method) {
    case ModelMethod::flatten: return "flatten";
    case ModelMethod::o_align: return "oalign";
    case ModelMethod::svd: return "svd";
    case ModelMethod::dense: return "dense";
    case ModelMethod::glnet: return "glnet";
  }
  return "glnet";
}

ModelMethod parse_model_method(std::string_view s) {
  if (s == "glnet") return ModelMethod::glnet;
  switch (parse_feature_method(s)) {
    case FeatureMethod::flatten: return ModelMethod::flatten;
    case FeatureMethod::o_align: return ModelMethod::o_align;
    case FeatureMethod::svd: return ModelMethod::svd;
    case FeatureMethod::dense: return ModelMethod::dense;
  }
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

FeatureMethod feature_method_of(ModelMethod method) {
  switch (method) {
    case ModelMethod::flatten: return FeatureMethod::flatten;
    case ModelMethod::o_align: return FeatureMethod::o_align;
    case ModelMethod::svd: return FeatureMethod::svd;
    case ModelMethod::dense: return FeatureMethod::dense;
    case ModelMethod::glnet: break;
  }
  throw std::invalid_argument("glnet has no featurizer");
}

Standardizer Standardizer::fit(const Matrix& rows) {
  if (rows.rows() == 0) throw ShapeError("Standardizer::fit: no rows");
  const std::size_t d = rows.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  const double n = static_cast<double>(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += rows(i, j);
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (rows(i, j) - s.mean[j]) * (rows(i, j) - s.mean[j]);
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

void Standardizer::apply(Matrix& rows) const {
  if (rows.cols() != mean.size()) throw ShapeError("Standardizer: width mismatch");
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < rows.cols(); ++j) rows(i, j) = (rows(i, j) - mean[j]) / scale[j];
}

std::vector<std::span<double>> Model::tensors() {
  return method == ModelMethod::glnet ? glnet.tensors() : mlp.tensors();
}

std::vector<std::span<const double>> Model::tensors() const {
  return method == ModelMethod::glnet ? glnet.tensors() : mlp.tensors();
}

Model init_model(const ModelConfig& cfg, const TaskDataset& data, Rng& rng) {
  if (data.items.empty()) throw ShapeError("init_model: empty dataset");
  const auto it = std::find_if(data.items.begin(), data.items.end(),
                               [](const DatasetItem& item) { return item.split == Split::train; });
  const LoraUpdate& like = (it != data.items.end() ? *it : data.items.front()).update;

  Model model;
  model.method = cfg.method;
  model.task = data.task;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (const auto& layer : like.layers()) {
    model.layer_shapes.push_back({layer.n(), layer.m(), layer.rank()});
    shapes.emplace_back(layer.n(), layer.m());
  }

  if (cfg.method == ModelMethod::glnet) {
    GlNetConfig gc = cfg.glnet;
    gc.output_dim = data.task.label_dim;
    model.glnet = GlNetParams::init(shapes, gc, rng);
    if (cfg.standardize.value_or(false)) throw std::invalid_argument("glnet does not use feature standardization");
    return model;
  }

  model.featurizer.method = feature_method_of(cfg.method);
  model.featurizer.target_rank = cfg.target_rank;
  model.featurizer.dense_cap = cfg.dense_cap;
  if (cfg.method == ModelMethod::o_align) model.featurizer.templates = AlignTemplates::generate_like(like, cfg.template_seed);
  if (cfg.standardize.value_or(true)) model.standardizer = Standardizer{};

  std::vector<std::size_t> dims{featurize(model.featurizer, like).values.size()};
  dims.insert(dims.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
  dims.push_back(data.task.label_dim);
  model.mlp = MlpParams::init(dims, rng);
  return model;
}

Matrix predict(const Model& model, std::span<const LoraUpdate* const> xs) {
  if (model.method == ModelMethod::glnet) return glnet_forward_batch(model.glnet, xs);
  Matrix x = feature_rows(model, xs);
  if (model.standardizer) model.standardizer->apply(x);
  return mlp_forward_batch(model.mlp, x);
}

Matrix predict(const Model& model, const TaskDataset& data) {
  const auto xs = updates_of(data);
  return predict(model, xs);
}

Matrix label_matrix(const TaskDataset& data) { return labels_of(data); }

LossValue compute_loss(const Matrix& predictions, const Matrix& labels, LossKind kind) {
  if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols())
    throw ShapeError("compute_loss: predictions and labels differ in shape");
  const std::size_t count = predictions.size();
  if (count == 0) throw ShapeError("compute_loss: empty batch");
  LossValue out{0.0, Matrix(predictions.rows(), predictions.cols())};
  const auto p = predictions.data();
  const auto y = labels.data();
  auto g = out.gradient.data();
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (kind == LossKind::mse) {
      const double d = p[k] - y[k];
      out.value += d * d;
      g[k] = 2.0 * d * inv;
    } else {
      const double z = p[k];
      out.value += std::max(z, 0.0) - z * y[k] + std::log1p(std::exp(-std::abs(z)));
      g[k] = (1.0 / (1.0 + std::exp(-z)) - y[k]) * inv;
    }
  }
  out.value /= static_cast<double>(count);
  return out;
}

TrainResult train(Model model, const TaskDataset& data, const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be positive");
  if (cfg.epochs == 0) throw std::invalid_argument("train: need at least one epoch");
  const auto train_x = updates_of(data, Split::train);
  const auto val_x = updates_of(data, Split::val);
  if (train_x.empty()) throw ShapeError("train: no training items");
  const Matrix train_y = labels_of(data, Split::train);
  const Matrix val_y = labels_of(data, Split::val);
  const bool is_glnet = model.method == ModelMethod::glnet;

  Matrix train_f, val_f;
  if (!is_glnet) {
    train_f = feature_rows(model, train_x);
    if (!val_x.empty()) val_f = feature_rows(model, val_x);
    if (model.standardizer) {
      if (model.standardizer->mean.empty()) {
        model.standardizer = Standardizer::fit(train_f);
        quantize_in_place(model.standardizer->mean);
        quantize_in_place(model.standardizer->scale);
      }
      model.standardizer->apply(train_f);
      if (!val_x.empty()) model.standardizer->apply(val_f);
    }
  }

  auto full_pass = [&](Split split) {
    const bool tr = split == Split::train;
    const Matrix pred = is_glnet ? glnet_forward_batch(model.glnet, tr ? train_x : val_x)
                                 : mlp_forward_batch(model.mlp, tr ? train_f : val_f);
    const Matrix& y = tr ? train_y : val_y;
    EpochLog row;
    row.split = split;
    row.loss = compute_loss(pred, y, cfg.loss).value;
    try {
      row.metrics = compute_metrics(pred, y, data.task.kind);
    } catch (const UndefinedMetricError&) {
      row.metrics.mse = mean_squared_error(pred.data(), y.data());
    }
    return row;
  };

  Adam adam(cfg.learning_rate, cfg.weight_decay);
  Rng shuffle_rng = Rng(cfg.seed).split(kShuffleStream);
  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      const Matrix y = gather_rows(train_y, idx);
      double loss = 0.0;
      auto fail = [&] {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      };
      if (is_glnet) {
        std::vector<const LoraUpdate*> xb(idx.size());
        for (std::size_t b = 0; b < idx.size(); ++b) xb[b] = train_x[idx[b]];
        GlNetStep step = glnet_forward_backward(model.glnet, xb, [&](const Matrix& pred) {
          LossValue lv = compute_loss(pred, y, cfg.loss);
          loss = lv.value;
          if (!std::isfinite(loss)) fail();
          return std::move(lv.gradient);
        });
        const auto grads = step.grads.tensors();
        adam.step(model.glnet.tensors(), as_const(grads));
      } else {
        MlpTrace trace;
        const Matrix pred = mlp_forward_batch(model.mlp, gather_rows(train_f, idx), &trace);
        LossValue lv = compute_loss(pred, y, cfg.loss);
        loss = lv.value;
        if (!std::isfinite(loss)) fail();
        MlpGradients g = mlp_backward_batch(model.mlp, trace, lv.gradient);
        const auto grads = g.params.tensors();
        adam.step(model.mlp.tensors(), as_const(grads));
      }
    }
    if (epoch == cfg.epochs)
      for (auto t : model.tensors()) quantize_in_place(t);

    EpochLog tr = full_pass(Split::train);
    tr.epoch = epoch;
    if (!std::isfinite(tr.loss))
      throw NumericalError("non-finite training loss after epoch " + std::to_string(epoch));
    result.log.push_back(tr);
    if (!val_x.empty()) {
      EpochLog va = full_pass(Split::val);
      va.epoch = epoch;
      result.log.push_back(va);
    }
  }
  result.model = std::move(model);
  return result;
}

Metrics evaluate(const Model& model, const TaskDataset& data) {
  return compute_metrics(predict(model, data), labels_of(data), data.task.kind);
}

std::string log_to_csv(std::span<const EpochLog> log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,split,loss,mse,r2,kendall_tau,accuracy\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& row : log) {
    os << row.epoch << ',' << to_string(row.split) << ',' << row.loss << ',';
    opt(row.metrics.mse);
    os << ',';
    opt(row.metrics.r2);
    os << ',';
    opt(row.metrics.kendall_tau);
    os << ',';
    opt(row.metrics.accuracy);
    os << '\n';
  }
  return os.str();
}

}  // namespace lol
