// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>

#include "lol/container.hpp"

namespace lol {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t state) {
  for (std::uint8_t b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string content_hash(const std::filesystem::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file() && e.path().filename() != "run.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string name = f.filename().string();
      h = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()), h);
      h = fnv1a(read_file(f), h);
    }
  } else {
    h = fnv1a(read_file(path), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["command"] = command;
  j["seeds"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : seeds) j["seeds"][k] = v;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& [p, h] : inputs) j["inputs"].push_back({{"path", p}, {"fnv1a64", h}});
  j["outputs"] = outputs;
  j["timings_s"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : timings_s) j["timings_s"][k] = v;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

}  // namespace lol
