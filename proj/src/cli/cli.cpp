// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

#include "lol/bench.hpp"
#include "lol/checks.hpp"
#include "lol/container.hpp"
#include "lol/errors.hpp"
#include "lol/featurizers.hpp"
#include "lol/manifest.hpp"
#include "lol/parallel.hpp"
#include "lol/synth.hpp"
#include "lol/train.hpp"

namespace lol {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitStream = 0x494E4954ULL;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw UsageError(std::string(what) + " '" + p.string() + "' does not exist");
}

fs::path sibling(const fs::path& p, const char* suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

TaskDataset select_split(const TaskDataset& data, const std::string& split) {
  if (split == "all") return data;
  TaskDataset out = data.subset(parse_split(split));
  if (out.items.empty()) throw UsageError("split '" + split + "' has no items");
  return out;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  auto field = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["mse"] = field(m.mse);
  j["r2"] = field(m.r2);
  j["kendall_tau"] = field(m.kendall_tau);
  j["accuracy"] = field(m.accuracy);
  return j;
}

struct GenFlags {
  std::string task;
  std::size_t count = 0;
  std::vector<std::size_t> shape;
  std::size_t rank = 0;
  std::string gauge = "canonical";
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::size_t probes = 4;
  std::string out;
};

struct FeaturizeFlags {
  std::string data;
  std::string method;
  std::size_t target_rank = 0;
  std::uint64_t template_seed = 0;
  std::size_t dense_cap = kDefaultDenseCap;
  std::string split = "all";
  std::string out;
};

struct TrainFlags {
  std::string data;
  std::string method;
  std::string out;
  std::string log;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::size_t target_rank = 0;
  std::uint64_t template_seed = 0;
  std::size_t dense_cap = kDefaultDenseCap;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t width = 32;
  std::size_t stacks = 1;
  std::string nonlinearity = "none";
  std::vector<std::size_t> head = {256, 128};
  std::string loss = "auto";
  bool no_standardize = false;
};

struct EvalFlags {
  std::string model;
  std::string data;
  std::string split = "all";
};

struct CheckFlags {
  std::string suite;
  std::size_t trials = 100;
  std::optional<double> tol;
  std::uint64_t seed = 0;
  bool identity = false;
};

struct BenchFlags {
  std::vector<std::size_t> sizes = {512, 1024, 2048, 4096};
  std::size_t rank = 4;
  std::size_t repeat = 3;
  std::uint64_t seed = 0;
  double min_time = 0.02;
};

int cmd_gen(const GenFlags& f, const std::vector<std::string>& argv, std::ostream& err) {
  const Stopwatch clock;
  if (f.shape.empty() || f.shape.size() % 2 != 0)
    throw UsageError("--shape needs n,m pairs (got " + std::to_string(f.shape.size()) + " numbers)");
  SynthTaskSpec spec;
  spec.teacher = parse_teacher(f.task);
  spec.count = f.count;
  spec.layers.clear();
  for (std::size_t i = 0; i < f.shape.size(); i += 2) spec.layers.emplace_back(f.shape[i], f.shape[i + 1]);
  spec.rank = f.rank;
  spec.gauge_policy = parse_gauge_policy(f.gauge);
  spec.noise_std = f.noise;
  spec.seed = f.seed;
  spec.probes = f.probes;
  spec.validate();
  const TaskDataset data = generate(spec);
  save_dataset(data, f.out);

  RunManifest rm;
  rm.command = argv;
  rm.seeds["seed"] = f.seed;
  rm.outputs.push_back(f.out);
  rm.timings_s["total"] = clock.seconds();
  rm.write(fs::path(f.out) / "run.json");
  err << "wrote " << data.items.size() << " items to " << f.out << "\n";
  return kExitOk;
}

int cmd_featurize(const FeaturizeFlags& f, const std::vector<std::string>& argv, std::ostream& err) {
  const Stopwatch clock;
  require_exists(f.data, "dataset");
  const TaskDataset data = select_split(load_dataset(f.data), f.split);
  FeaturizerConfig cfg;
  cfg.method = parse_feature_method(f.method);
  cfg.target_rank = f.target_rank;
  cfg.dense_cap = f.dense_cap;
  if (cfg.method == FeatureMethod::o_align && !data.items.empty())
    cfg.templates = AlignTemplates::generate_like(data.items.front().update, f.template_seed);
  std::vector<LoraUpdate> xs;
  for (const auto& item : data.items) xs.push_back(item.update);
  const auto features = featurize_batch(cfg, xs);
  save_features(make_feature_table(features, f.target_rank), f.out);

  RunManifest rm;
  rm.command = argv;
  rm.seeds["template_seed"] = f.template_seed;
  rm.inputs.emplace_back(f.data, content_hash(f.data));
  rm.outputs = {f.out, sibling(f.out, ".json").string()};
  rm.timings_s["total"] = clock.seconds();
  rm.write(sibling(f.out, ".run.json"));
  err << "wrote " << features.size() << " feature rows to " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const TrainFlags& f, const std::vector<std::string>& argv, std::ostream& err) {
  const Stopwatch clock;
  require_exists(f.data, "dataset");
  const TaskDataset data = load_dataset(f.data);
  ModelConfig mc;
  mc.method = parse_model_method(f.method);
  mc.target_rank = f.target_rank;
  mc.template_seed = f.template_seed;
  mc.dense_cap = f.dense_cap;
  mc.mlp_hidden = f.hidden;
  mc.glnet.hidden_width = f.width;
  mc.glnet.stacks = f.stacks;
  mc.glnet.nonlinearity = parse_nonlinearity(f.nonlinearity);
  mc.glnet.head_hidden = f.head;
  if (f.no_standardize) mc.standardize = false;

  TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch_size = f.batch_size;
  tc.learning_rate = f.lr;
  tc.weight_decay = f.weight_decay;
  tc.seed = f.seed;
  if (f.loss == "auto") tc.loss = data.task.kind == TaskKind::multilabel ? LossKind::bce_logits : LossKind::mse;
  else if (f.loss == "mse") tc.loss = LossKind::mse;
  else if (f.loss == "bce") tc.loss = LossKind::bce_logits;
  else throw UsageError("unknown loss '" + f.loss + "' (expected auto, mse or bce)");

  Rng init = Rng(f.seed).split(kInitStream);
  Model model = init_model(mc, data, init);
  const double setup_s = clock.seconds();
  TrainResult result = train(std::move(model), data, tc);
  const std::string log_path = f.log.empty() ? sibling(f.out, ".log.csv").string() : f.log;
  save_model(result.model, f.out);
  write_file_atomic(log_path, log_to_csv(result.log));

  RunManifest rm;
  rm.command = argv;
  rm.seeds["seed"] = f.seed;
  rm.seeds["template_seed"] = f.template_seed;
  rm.inputs.emplace_back(f.data, content_hash(f.data));
  rm.outputs = {f.out, log_path};
  rm.timings_s["setup"] = setup_s;
  rm.timings_s["total"] = clock.seconds();
  rm.write(sibling(f.out, ".run.json"));
  const auto& last = result.log.back();
  err << "trained " << to_string(mc.method) << " for " << f.epochs << " epochs; final " << to_string(last.split)
      << " loss " << last.loss << "\n";
  return kExitOk;
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  require_exists(f.model, "model");
  require_exists(f.data, "dataset");
  const Model model = load_model(f.model);
  const TaskDataset data = select_split(load_dataset(f.data), f.split);
  const Matrix pred = predict(model, data);
  const Matrix labels = label_matrix(data);
  Metrics m;
  try {
    m = compute_metrics(pred, labels, data.task.kind);
  } catch (const UndefinedMetricError&) {
    m.mse = mean_squared_error(pred.data(), labels.data());
  }
  out << metrics_json(m).dump() << "\n";
  return kExitOk;
}

int cmd_check(const CheckFlags& f, std::ostream& out) {
  CheckOptions opt;
  opt.trials = f.trials;
  opt.tol = f.tol;
  opt.seed = f.seed;
  opt.identity_gauge = f.identity;
  const SuiteReport report = run_suite(f.suite, opt);
  out << report.to_json() << "\n";
  return report.pass() ? kExitOk : kExitFailure;
}

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  const auto rows = run_bench(f.sizes, f.rank, f.repeat, f.seed, f.min_time);
  out << bench_to_csv(rows);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning on LoRA factors: datasets, featurizers, GL-invariant models"};
  app.name("lol");
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (default: LOL_THREADS, then all cores)");
  app.fallthrough();

  GenFlags gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
  g->add_option("--task", gen.task, "frobenius | rowsum | multilabel")->required();
  g->add_option("--count", gen.count, "number of items")->required();
  g->add_option("--shape", gen.shape, "layer shapes n,m[,n2,m2...]")->required()->delimiter(',');
  g->add_option("--rank", gen.rank, "factor rank")->required();
  g->add_option("--gauge", gen.gauge, "canonical | scrambled | train-canonical-test-scrambled");
  g->add_option("--noise", gen.noise, "label noise standard deviation");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--probes", gen.probes, "label width of the multilabel task");
  g->add_option("--out", gen.out, "output directory")->required();

  FeaturizeFlags feat;
  auto* fz = app.add_subcommand("featurize", "dump features of a dataset");
  fz->add_option("--data", feat.data, "dataset directory")->required();
  fz->add_option("--method", feat.method, "flatten | oalign | svd | dense")->required();
  fz->add_option("--target-rank", feat.target_rank, "svd: truncate or zero-pad to this many values");
  fz->add_option("--template-seed", feat.template_seed, "oalign template seed");
  fz->add_option("--dense-cap", feat.dense_cap, "largest n*m the dense featurizer accepts");
  fz->add_option("--split", feat.split, "train | val | test | all");
  fz->add_option("--out", feat.out, "output .lolf file")->required();

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "train a model and write a checkpoint");
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--method", tr.method, "flatten | oalign | svd | dense | glnet")->required();
  t->add_option("--out", tr.out, "output .lolm checkpoint")->required();
  t->add_option("--log", tr.log, "per-epoch CSV log (default: <out>.log.csv)");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--weight-decay", tr.weight_decay);
  t->add_option("--seed", tr.seed);
  t->add_option("--target-rank", tr.target_rank, "svd: truncate or zero-pad to this many values");
  t->add_option("--template-seed", tr.template_seed);
  t->add_option("--dense-cap", tr.dense_cap);
  t->add_option("--hidden", tr.hidden, "MLP hidden widths")->delimiter(',');
  t->add_option("--width", tr.width, "glnet hidden width");
  t->add_option("--stacks", tr.stacks, "glnet equivariant layers");
  t->add_option("--nonlinearity", tr.nonlinearity, "none | relu_sign | tanh_rowsum");
  t->add_option("--head", tr.head, "glnet head hidden widths")->delimiter(',');
  t->add_option("--loss", tr.loss, "auto | mse | bce");
  t->add_flag("--no-standardize", tr.no_standardize, "feed raw features to the MLP");

  EvalFlags ev;
  auto* e = app.add_subcommand("eval", "print metrics of a checkpoint as JSON");
  e->add_option("--model", ev.model, "checkpoint")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--split", ev.split, "train | val | test | all");

  CheckFlags ck;
  auto* c = app.add_subcommand("check", "run a property suite");
  c->add_option("--suite", ck.suite, "invariance | equivariance | gradients | oracles")->required();
  c->add_option("--trials", ck.trials);
  c->add_option("--tol", ck.tol);
  c->add_option("--seed", ck.seed);
  c->add_flag("--identity", ck.identity, "equivariance: use the identity gauge");

  BenchFlags bf;
  auto* b = app.add_subcommand("bench", "time featurizers and forward passes");
  b->add_option("--sizes", bf.sizes, "n values (n = m)")->delimiter(',');
  b->add_option("--rank", bf.rank);
  b->add_option("--repeat", bf.repeat);
  b->add_option("--seed", bf.seed);
  b->add_option("--min-time", bf.min_time, "seconds per timing repetition");

  std::vector<std::string> argv{"lol"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads > 0) set_thread_limit(threads);
    if (g->parsed()) return cmd_gen(gen, argv, err);
    if (fz->parsed()) return cmd_featurize(feat, argv, err);
    if (t->parsed()) return cmd_train(tr, argv, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (c->parsed()) return cmd_check(ck, out);
    if (b->parsed()) return cmd_bench(bf, out);
  } catch (const NumericalError& ex) {
    err << "lol: numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const CapabilityError& ex) {
    err << "lol: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& ex) {
    err << "lol: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& ex) {
    err << "lol: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    err << "lol: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& ex) {
    err << "lol: malformed JSON: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "lol: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lol
