// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/dataset.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "lol/container.hpp"
#include "lol/errors.hpp"

namespace lol {

std::string_view to_string(TaskKind kind) { return kind == TaskKind::regression ? "regression" : "multilabel"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "regression") return TaskKind::regression;
  if (s == "multilabel") return TaskKind::multilabel;
  throw std::invalid_argument("unknown task kind '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

void TaskDataset::validate() const {
  if (items.empty()) return;
  const LoraUpdate& ref = items.front().update;
  const bool mixed = task.allows_mixed_ranks();
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& it = items[k];
    const auto& x = it.update;
    if (x.layer_count() != ref.layer_count())
      throw ShapeError("dataset item " + std::to_string(k) + " has a different layer count");
    for (std::size_t i = 0; i < x.layer_count(); ++i) {
      const auto& a = x.layer(i);
      const auto& b = ref.layer(i);
      if (a.n() != b.n() || a.m() != b.m() || (!mixed && a.rank() != b.rank()))
        throw ShapeError("dataset item " + std::to_string(k) + " layer " + std::to_string(i) +
                         " does not match the first item's shape");
    }
    if (it.label.size() != task.label_dim)
      throw ShapeError("dataset item " + std::to_string(k) + " label has " + std::to_string(it.label.size()) +
                       " entries, task declares " + std::to_string(task.label_dim));
    if (task.kind == TaskKind::multilabel)
      for (double v : it.label)
        if (v != 0.0 && v != 1.0) throw ShapeError("dataset item " + std::to_string(k) + " has a non-binary label");
  }
}

TaskDataset TaskDataset::subset(Split split) const {
  TaskDataset out{task, {}};
  for (const auto& it : items)
    if (it.split == split) out.items.push_back(it);
  return out;
}

std::size_t TaskDataset::count(Split split) const {
  std::size_t n = 0;
  for (const auto& it : items) n += it.split == split ? 1 : 0;
  return n;
}

void save_dataset(const TaskDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["task"] = {{"kind", to_string(data.task.kind)},
                      {"label_dim", data.task.label_dim},
                      {"name", data.task.name}};
  manifest["items"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < data.items.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "item_%05zu.lolw", k);
    save_lolw(data.items[k].update, dir / name);
    manifest["items"].push_back(
        {{"file", name}, {"label", data.items[k].label}, {"split", to_string(data.items[k].split)}});
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(1) + "\n");
}

TaskDataset load_dataset(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
  TaskDataset data;
  const auto& task = manifest.at("task");
  data.task.kind = parse_task_kind(task.at("kind").get<std::string>());
  data.task.label_dim = task.at("label_dim").get<std::size_t>();
  data.task.name = task.at("name").get<std::string>();
  for (const auto& entry : manifest.at("items")) {
    DatasetItem item;
    item.update = load_lolw(dir / entry.at("file").get<std::string>());
    item.label = entry.at("label").get<std::vector<double>>();
    item.split = parse_split(entry.value("split", std::string("train")));
    data.items.push_back(std::move(item));
  }
  data.validate();
  return data;
}

}  // namespace lol
