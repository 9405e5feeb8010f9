#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "stv/error.hpp"

namespace stv {

// Little-endian primitive encoding shared by the clip and checkpoint formats.

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { put(&v, 1); }
  void u16(std::uint16_t v) { unsigned_le(v, 2); }
  void u32(std::uint32_t v) { unsigned_le(v, 4); }
  void u64(std::uint64_t v) { unsigned_le(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void bytes(const std::string& s) { put(s.data(), s.size()); }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

 private:
  void unsigned_le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    put(buf, n);
  }
  void put(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw Error("io", "write failed");
  }

  std::ostream& out_;
};

/// Reader whose failures name the section being decoded, so a truncated
/// file reports which part is missing.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void section(std::string name) { section_ = std::move(name); }
  const std::string& section() const { return section_; }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  std::uint8_t u8() {
    std::uint8_t v;
    get(&v, 1);
    return v;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(unsigned_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_le(4)); }
  std::uint64_t u64() { return unsigned_le(8); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    get(s.data(), n);
    return s;
  }
  std::string string(std::size_t limit = 1u << 26) {
    const std::uint32_t n = u32();
    if (n > limit) throw Error("corrupt", "string length " + std::to_string(n) + " in section '" + section_ + "'");
    return bytes(n);
  }

 private:
  std::uint64_t unsigned_le(int n) {
    unsigned char buf[8];
    get(buf, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }
  void get(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error("truncated", "file truncated: missing section '" + section_ + "'");
    }
  }

  std::istream& in_;
  std::string section_ = "header";
};

}  // namespace stv
