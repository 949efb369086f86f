#pragma once

// Little-endian primitives shared by the VSEB/VSCB/VSTK readers and writers.
// All multi-byte fields in the on-disk formats are little-endian regardless of
// host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "varstok/error.hpp"

namespace varstok::detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u16le(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8)};
  write_bytes(os, b, 2);
}

inline void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4);
}

inline void write_u64le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 8);
}

inline void write_f32le(std::ostream& os, float v) {
  write_u32le(os, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64le(std::ostream& os, double v) {
  write_u64le(os, std::bit_cast<std::uint64_t>(v));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n,
                       const std::string& module) {
  if (!is.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
    fail(errc::bad_format, module, "truncated file (corrupted length)");
}

inline std::uint16_t read_u16le(std::istream& is, const std::string& module) {
  unsigned char b[2];
  read_bytes(is, b, 2, module);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::uint32_t read_u32le(std::istream& is, const std::string& module) {
  unsigned char b[4];
  read_bytes(is, b, 4, module);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64le(std::istream& is, const std::string& module) {
  unsigned char b[8];
  read_bytes(is, b, 8, module);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline float read_f32le(std::istream& is, const std::string& module) {
  return std::bit_cast<float>(read_u32le(is, module));
}

inline double read_f64le(std::istream& is, const std::string& module) {
  return std::bit_cast<double>(read_u64le(is, module));
}

inline void expect_magic(std::istream& is, const char (&magic)[5],
                         const std::string& module) {
  char got[4];
  read_bytes(is, got, 4, module);
  if (std::memcmp(got, magic, 4) != 0)
    fail(errc::bad_format, module, std::string("bad magic, expected ") + magic);
}

} // namespace varstok::detail
