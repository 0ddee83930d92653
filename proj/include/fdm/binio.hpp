#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "fdm/common.hpp"

namespace fdm {

// Little-endian serialization into a growable byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b) { buf_.append(b); }
  // u32 length prefix followed by raw bytes.
  void str(std::string_view s);
  void f32s(std::span<const float> v);
  void header(std::string_view magic, std::uint8_t version);

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::string buf_;
};

// Bounds-checked reader; every failure reports the absolute byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str(std::size_t max_len = 1u << 30);
  std::string_view bytes(std::size_t n);
  void f32s(std::span<float> out);
  // Validates magic and version; returns the version byte.
  std::uint8_t header(std::string_view magic, std::uint8_t supported_version);

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  [[noreturn]] void fail(FormatFault fault, const std::string& what) const;

 private:
  void need(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);
// Returns false (and leaves the file untouched) when the existing content
// already matches byte for byte.
bool write_file_if_changed(const std::filesystem::path& path,
                           std::string_view bytes);

}  // namespace fdm
