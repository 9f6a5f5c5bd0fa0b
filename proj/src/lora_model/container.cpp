// Copyright 2026 The lol-lora Authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#include "lol/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lol/errors.hpp"

namespace lol {

void ByteWriter::magic(std::string_view four_cc) {
  for (char c : four_cc.substr(0, 4)) buf_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

void ByteWriter::f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

void ByteWriter::text(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteReader::expect_magic(std::string_view four_cc) {
  if (remaining() < 4 || std::memcmp(data_.data() + pos_, four_cc.data(), 4) != 0)
    throw ParseError(ParseError::Kind::bad_magic, pos_, "bad magic: expected '" + std::string(four_cc) + "'");
  pos_ += 4;
}

std::uint32_t ByteReader::u32(const char* what) {
  if (remaining() < 4)
    throw ParseError(ParseError::Kind::truncated, pos_, std::string("truncated payload reading ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

double ByteReader::f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }

std::span<const std::uint8_t> ByteReader::bytes(std::uint64_t n, const char* what) {
  if (remaining() < n)
    throw ParseError(ParseError::Kind::truncated, pos_, std::string("truncated payload reading ") + what);
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::text(const char* what) {
  const std::uint32_t len = u32(what);
  auto b = bytes(len, what);
  return std::string(b.begin(), b.end());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_lolw(const LoraUpdate& x) {
  ByteWriter w;
  w.magic("LOLW");
  w.u32(kLolwVersion);
  w.u32(static_cast<std::uint32_t>(x.layer_count()));
  for (const auto& layer : x.layers()) {
    w.text(layer.name);
    w.u32(static_cast<std::uint32_t>(layer.n()));
    w.u32(static_cast<std::uint32_t>(layer.m()));
    w.u32(static_cast<std::uint32_t>(layer.rank()));
    for (double v : layer.u.data()) w.f32(v);
    for (double v : layer.v.data()) w.f32(v);
  }
  return w.take();
}

namespace {

Matrix read_tensor(ByteReader& r, std::uint64_t rows, std::uint64_t cols, const char* what) {
  const std::uint64_t count = rows * cols;
  if (count * 4 > r.remaining())
    throw ParseError(ParseError::Kind::truncated, r.offset(),
                     std::string("truncated payload: ") + what + " needs " + std::to_string(count * 4) + " bytes, " +
                         std::to_string(r.remaining()) + " remain");
  std::vector<double> data(count);
  for (auto& v : data) v = r.f32(what);
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

LoraUpdate decode_lolw(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LOLW");
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kLolwVersion)
    throw ParseError(ParseError::Kind::version_mismatch, version_at,
                     "version mismatch: file has " + std::to_string(version) + ", reader supports " +
                         std::to_string(kLolwVersion));
  const std::uint32_t count = r.u32("layer count");
  std::vector<LoraLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text("layer name");
    const std::uint64_t shape_at = r.offset();
    const std::uint64_t n = r.u32("n");
    const std::uint64_t m = r.u32("m");
    const std::uint64_t rank = r.u32("r");
    if (n * rank > kMaxTensorElements || m * rank > kMaxTensorElements)
      throw ParseError(ParseError::Kind::shape_overflow, shape_at,
                       "shape overflow: layer '" + name + "' declares " + std::to_string(n) + "x" +
                           std::to_string(rank) + " / " + std::to_string(m) + "x" + std::to_string(rank));
    Matrix u = read_tensor(r, n, rank, "U");
    Matrix v = read_tensor(r, m, rank, "V");
    layers.push_back({std::move(name), std::move(u), std::move(v)});
  }
  if (r.remaining() != 0)
    throw ParseError(ParseError::Kind::bad_value, r.offset(), "trailing bytes after last layer");
  try {
    return LoraUpdate(std::move(layers));
  } catch (const ShapeError& e) {
    throw ParseError(ParseError::Kind::bad_value, 12, e.what());
  }
}

void save_lolw(const LoraUpdate& x, const std::filesystem::path& path) { write_file_atomic(path, encode_lolw(x)); }

LoraUpdate load_lolw(const std::filesystem::path& path) { return decode_lolw(read_file(path)); }

LoraUpdate quantize_f32(const LoraUpdate& x) {
  std::vector<LoraLayer> layers;
  for (const auto& layer : x.layers()) layers.push_back({layer.name, quantize_f32(layer.u), quantize_f32(layer.v)});
  return LoraUpdate(std::move(layers));
}

}  // namespace lol
