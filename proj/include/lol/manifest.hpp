// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lol {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

/// Hash of a file, or of every regular file in a directory (sorted by name,
/// skipping run.json), as 16 hex digits.
std::string content_hash(const std::filesystem::path& path);

/// Provenance record written next to every artifact a command produces.
struct RunManifest {
  std::vector<std::string> command;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::pair<std::string, std::string>> inputs;  ///< (path, content hash)
  std::vector<std::string> outputs;
  std::map<std::string, double> timings_s;
  std::string version = kLibraryVersion;

  std::string to_json() const;
  /// Atomic write (temporary file + rename).
  void write(const std::filesystem::path& path) const;
};

}  // namespace lol
