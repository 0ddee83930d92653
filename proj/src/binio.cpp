#include "fdm/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fdm {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void ByteWriter::f32s(std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * 4);
  } else {
    for (float x : v) f32(x);
  }
}

void ByteWriter::header(std::string_view magic, std::uint8_t version) {
  bytes(magic);
  u8(version);
}

void ByteReader::fail(FormatFault fault, const std::string& what) const {
  throw FormatError(fault, pos_, what);
}

void ByteReader::need(std::size_t n) {
  if (data_.size() - pos_ < n) {
    fail(FormatFault::kTruncated,
         "need " + std::to_string(n) + " bytes, have " +
             std::to_string(data_.size() - pos_));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i]))
         << (8 * i);
  }
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str(std::size_t max_len) {
  const std::uint32_t n = u32();
  if (n > max_len) fail(FormatFault::kCorrupt, "string length out of range");
  return std::string(bytes(n));
}

std::string_view ByteReader::bytes(std::size_t n) {
  need(n);
  std::string_view v = data_.substr(pos_, n);
  pos_ += n;
  return v;
}

void ByteReader::f32s(std::span<float> out) {
  need(out.size() * 4);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), data_.data() + pos_, out.size() * 4);
    pos_ += out.size() * 4;
  } else {
    for (float& x : out) x = f32();
  }
}

std::uint8_t ByteReader::header(std::string_view magic,
                                std::uint8_t supported_version) {
  if (data_.size() - pos_ < magic.size() ||
      data_.substr(pos_, magic.size()) != magic) {
    if (data_.size() - pos_ < magic.size() &&
        magic.substr(0, data_.size() - pos_) == data_.substr(pos_)) {
      fail(FormatFault::kTruncated, "header shorter than magic");
    }
    fail(FormatFault::kBadMagic,
         "expected magic \"" + std::string(magic) + "\"");
  }
  pos_ += magic.size();
  const std::uint8_t version = u8();
  if (version != supported_version) {
    pos_ -= 1;
    fail(FormatFault::kVersionMismatch,
         "unsupported version " + std::to_string(version) + " (expected " +
             std::to_string(supported_version) + ")");
  }
  return version;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

bool write_file_if_changed(const std::filesystem::path& path,
                           std::string_view bytes) {
  std::error_code ec;
  if (std::filesystem::exists(path, ec) &&
      std::filesystem::file_size(path, ec) == bytes.size()) {
    const std::string existing = read_file(path);
    if (fnv1a64(existing) == fnv1a64(bytes) && existing == bytes) return false;
  }
  write_file(path, bytes);
  return true;
}

}  // namespace fdm
