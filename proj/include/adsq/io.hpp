#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "adsq/errors.hpp"

namespace adsq::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

inline constexpr std::size_t kMagicSize = 8;

// Sequential little-endian reader over an in-memory file image.
class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), path);
  }

  void expect_magic(std::string_view magic) {
    if (bytes_.size() < kMagicSize) throw FormatError(origin_ + ": missing magic " + std::string(magic));
    if (std::memcmp(bytes_.data(), magic.data(), kMagicSize) != 0) {
      throw FormatError(origin_ + ": bad magic, expected " + std::string(magic));
    }
    pos_ = kMagicSize;
  }

  std::uint32_t u32() {
    std::uint32_t v;
    header_read(&v, sizeof v);
    return v;
  }

  // Payload reads raise TruncationError; header reads raise FormatError.
  template <typename T>
  T value() {
    T v;
    payload_read(&v, sizeof v);
    return v;
  }

  std::uint8_t byte() { return value<std::uint8_t>(); }

  void require_payload(std::size_t bytes) const {
    if (remaining() < bytes) {
      throw TruncationError(origin_ + ": payload truncated (" + std::to_string(remaining()) + " of " +
                            std::to_string(bytes) + " bytes)");
    }
  }

  void expect_end() const {
    if (remaining() != 0) throw FormatError(origin_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  void header_read(void* dst, std::size_t size) {
    if (remaining() < size) throw FormatError(origin_ + ": truncated header");
    std::memcpy(dst, bytes_.data() + pos_, size);
    pos_ += size;
  }
  void payload_read(void* dst, std::size_t size) {
    require_payload(size);
    std::memcpy(dst, bytes_.data() + pos_, size);
    pos_ += size;
  }

  std::vector<std::uint8_t> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

class Writer {
 public:
  explicit Writer(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

  void u32(std::uint32_t v) { append(&v, sizeof v); }

  template <typename T>
  void value(T v) {
    append(&v, sizeof v);
  }

  void raw(const std::uint8_t* data, std::size_t size) { bytes_.insert(bytes_.end(), data, data + size); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void save(const std::string& path) const;

 private:
  void append(const void* src, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(src);
    bytes_.insert(bytes_.end(), p, p + size);
  }

  std::vector<std::uint8_t> bytes_;
};

inline void save_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path + ": write failed");
}

inline void Writer::save(const std::string& path) const { save_bytes(path, bytes_); }

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ArgumentError(std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace adsq::io
