// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lol/lora.hpp"

namespace lol {

enum class TaskKind { regression, multilabel };
enum class Split { train, val, test };

std::string_view to_string(TaskKind kind);
std::string_view to_string(Split split);
TaskKind parse_task_kind(std::string_view s);
Split parse_split(std::string_view s);

struct TaskDescriptor {
  TaskKind kind = TaskKind::regression;
  std::size_t label_dim = 1;
  std::string name;

  /// Rank-generalization datasets may mix ranks across items.
  bool allows_mixed_ranks() const { return name.find("rank-gen") != std::string::npos; }
};

struct DatasetItem {
  LoraUpdate update;
  std::vector<double> label;
  Split split = Split::train;
};

struct TaskDataset {
  TaskDescriptor task;
  std::vector<DatasetItem> items;

  /// Throws ShapeError when items disagree on layer structure (ranks excepted
  /// for "rank-gen" tasks) or labels violate the task descriptor.
  void validate() const;

  /// Items of one split, in dataset order.
  TaskDataset subset(Split split) const;
  std::size_t count(Split split) const;
};

/// Writes item_NNNNN.lolw files and manifest.json into `dir` (created if needed):
///   {"task": {"kind", "label_dim", "name"}, "items": [{"file", "label", "split"}, ...]}
void save_dataset(const TaskDataset& data, const std::filesystem::path& dir);
TaskDataset load_dataset(const std::filesystem::path& dir);

}  // namespace lol
