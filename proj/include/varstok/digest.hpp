#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <openssl/evp.h>

namespace varstok {

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(const void* data, std::size_t n) {
  Digest d{};
  unsigned int len = 0;
  EVP_Digest(data, n, d.data(), &len, EVP_sha256(), nullptr);
  return d;
}

inline std::string hex(const Digest& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : d) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

} // namespace varstok
