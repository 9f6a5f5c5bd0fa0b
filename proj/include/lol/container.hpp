// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

// Little-endian binary containers.
//
// LOLW (one LoRA update):
//   "LOLW" | u32 version=1 | u32 layer_count
//   per layer: u32 name_len | name bytes (UTF-8) | u32 n | u32 m | u32 r
//              | n·r f32 (U, row-major) | m·r f32 (V, row-major)
//
// Every failure is reported as a ParseError naming the byte offset where the
// offending field starts.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lol/lora.hpp"

namespace lol {

inline constexpr std::uint32_t kLolwVersion = 1;
/// Largest element count accepted for a single stored tensor (1 GiB of float32).
inline constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 28;

class ByteWriter {
 public:
  void magic(std::string_view four_cc);
  void u32(std::uint32_t v);
  void f32(double v);
  void bytes(std::span<const std::uint8_t> b);
  void text(std::string_view s);  ///< u32 length prefix + raw bytes

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) noexcept : data_(data) {}

  /// Checks a four-byte magic; ParseError(bad_magic) on mismatch or short input.
  void expect_magic(std::string_view four_cc);
  std::uint32_t u32(const char* what);
  double f32(const char* what);
  std::span<const std::uint8_t> bytes(std::uint64_t n, const char* what);
  std::string text(const char* what);

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> encode_lolw(const LoraUpdate& x);
LoraUpdate decode_lolw(std::span<const std::uint8_t> bytes);
void save_lolw(const LoraUpdate& x, const std::filesystem::path& path);
LoraUpdate load_lolw(const std::filesystem::path& path);

/// Rounds every entry through float32, i.e. what a save/load round trip yields.
LoraUpdate quantize_f32(const LoraUpdate& x);

}  // namespace lol
