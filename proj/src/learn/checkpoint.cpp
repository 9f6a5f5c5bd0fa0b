// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include <json.hpp>

#include <stdexcept>
#include <string>

#include "lol/container.hpp"
#include "lol/errors.hpp"
#include "lol/train.hpp"

namespace lol {

namespace {

using nlohmann::ordered_json;

std::vector<std::pair<std::size_t, std::size_t>> nm_shapes(const Model& model) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : model.layer_shapes) out.emplace_back(s[0], s[1]);
  return out;
}

ordered_json describe(const Model& model) {
  ordered_json j;
  j["method"] = std::string(to_string(model.method));
  j["task"] = {{"kind", std::string(to_string(model.task.kind))},
               {"label_dim", model.task.label_dim},
               {"name", model.task.name}};
  j["layer_shapes"] = ordered_json::array();
  for (const auto& s : model.layer_shapes) j["layer_shapes"].push_back({s[0], s[1], s[2]});
  if (model.method == ModelMethod::glnet) {
    std::vector<std::size_t> head_dims = model.glnet.head.dims();
    j["glnet"] = {{"hidden_width", model.glnet.hidden_width},
                  {"stacks", model.glnet.stacks.size()},
                  {"nonlinearity", std::string(to_string(model.glnet.nonlinearity))},
                  {"head_dims", head_dims},
                  {"product_cap", model.glnet.product_cap}};
  } else {
    j["featurizer"] = {{"target_rank", model.featurizer.target_rank},
                       {"template_seed", model.featurizer.templates ? model.featurizer.templates->seed : 0},
                       {"dense_cap", model.featurizer.dense_cap}};
    j["standardize"] = model.standardizer.has_value();
    j["mlp_dims"] = model.mlp.dims();
  }
  return j;
}

Model skeleton(const ordered_json& j) {
  Model model;
  model.method = parse_model_method(j.at("method").get<std::string>());
  const auto& task = j.at("task");
  model.task.kind = parse_task_kind(task.at("kind").get<std::string>());
  model.task.label_dim = task.at("label_dim").get<std::size_t>();
  model.task.name = task.at("name").get<std::string>();
  for (const auto& s : j.at("layer_shapes"))
    model.layer_shapes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(), s.at(2).get<std::size_t>()});
  if (model.layer_shapes.empty()) throw std::invalid_argument("no layers");

  Rng unused(0);
  if (model.method == ModelMethod::glnet) {
    const auto& g = j.at("glnet");
    GlNetConfig cfg;
    cfg.hidden_width = g.at("hidden_width").get<std::size_t>();
    cfg.stacks = g.at("stacks").get<std::size_t>();
    cfg.nonlinearity = parse_nonlinearity(g.at("nonlinearity").get<std::string>());
    cfg.product_cap = g.at("product_cap").get<std::size_t>();
    const auto head_dims = g.at("head_dims").get<std::vector<std::size_t>>();
    if (head_dims.size() < 2) throw std::invalid_argument("head needs at least two dims");
    cfg.head_hidden.assign(head_dims.begin() + 1, head_dims.end() - 1);
    cfg.output_dim = head_dims.back();
    const auto shapes = nm_shapes(model);
    model.glnet = GlNetParams::init(shapes, cfg, unused);
    if (model.glnet.head.dims() != head_dims) throw std::invalid_argument("head dims disagree with layer shapes");
    return model;
  }

  const auto& f = j.at("featurizer");
  model.featurizer.method = feature_method_of(model.method);
  model.featurizer.target_rank = f.at("target_rank").get<std::size_t>();
  model.featurizer.dense_cap = f.at("dense_cap").get<std::size_t>();
  if (model.method == ModelMethod::o_align) {
    const auto shapes = nm_shapes(model);
    std::vector<std::size_t> ranks;
    for (const auto& s : model.layer_shapes) ranks.push_back(s[2]);
    model.featurizer.templates = AlignTemplates::generate(shapes, ranks, f.at("template_seed").get<std::uint64_t>());
  }
  const auto dims = j.at("mlp_dims").get<std::vector<std::size_t>>();
  if (dims.size() < 2) throw std::invalid_argument("mlp needs at least two dims");
  model.mlp = MlpParams::init(dims, unused);
  if (j.at("standardize").get<bool>()) {
    const std::size_t d = dims.front();
    model.standardizer = Standardizer{std::vector<double>(d), std::vector<double>(d)};
  }
  return model;
}

std::vector<std::span<double>> blobs(Model& model) {
  std::vector<std::span<double>> out;
  if (model.standardizer) {
    out.emplace_back(model.standardizer->mean);
    out.emplace_back(model.standardizer->scale);
  }
  for (auto t : model.tensors()) out.push_back(t);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_lolm(const Model& model) {
  if (model.standardizer && model.standardizer->mean.empty())
    throw std::invalid_argument("encode_lolm: standardizer has not been fit yet");
  ByteWriter w;
  w.magic("LOLM");
  w.u32(kLolmVersion);
  w.text(describe(model).dump());
  Model copy = model;
  for (auto blob : blobs(copy))
    for (double v : blob) w.f32(v);
  return w.take();
}

Model decode_lolm(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LOLM");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kLolmVersion)
    throw ParseError(ParseError::Kind::version_mismatch, version_at,
                     "LOLM version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kLolmVersion) + ")");
  const std::uint64_t json_at = r.offset();
  const std::string text = r.text("descriptor");
  Model model;
  try {
    model = skeleton(ordered_json::parse(text));
  } catch (const std::exception& e) {
    throw ParseError(ParseError::Kind::bad_value, json_at, std::string("LOLM descriptor: ") + e.what());
  }
  for (auto blob : blobs(model)) {
    if (r.remaining() < blob.size() * 4)
      throw ParseError(ParseError::Kind::truncated, r.offset(), "LOLM parameters end early");
    for (double& v : blob) v = r.f32("parameter");
  }
  if (r.remaining() != 0)
    throw ParseError(ParseError::Kind::bad_value, r.offset(), "trailing bytes after LOLM parameters");
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_lolm(model));
}

Model load_model(const std::filesystem::path& path) { return decode_lolm(read_file(path)); }

}  // namespace lol
