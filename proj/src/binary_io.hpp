#pragma once

// Little-endian primitive encoding shared by the dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "lo3d/errors.hpp"

namespace lo3d::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const char* p, std::size_t n) {
    os_.write(p, static_cast<std::streamsize>(n));
    offset_ += n;
  }
  void u8(std::uint8_t v) { bytes(reinterpret_cast<const char*>(&v), 1); }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b, 8);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t offset() const { return offset_; }

 private:
  std::ostream& os_;
  std::uint64_t offset_ = 0;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(char* p, std::size_t n) {
    is_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw FormatError(what_ + ": truncated at byte offset " + std::to_string(offset_ + static_cast<std::uint64_t>(is_.gcount())) +
                        " (needed " + std::to_string(n) + " bytes at offset " + std::to_string(offset_) + ")");
    offset_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(reinterpret_cast<char*>(&v), 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t offset() const { return offset_; }
  const std::string& what() const { return what_; }

  void expect_tag(const char (&tag)[5], const char* description) {
    char got[4];
    const std::uint64_t at = offset_;
    bytes(got, 4);
    if (std::string(got, 4) != std::string(tag, 4))
      throw FormatError(what_ + ": bad " + description + " at byte offset " + std::to_string(at) + " (expected \"" +
                        std::string(tag, 4) + "\")");
  }

 private:
  std::istream& is_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace lo3d::detail
