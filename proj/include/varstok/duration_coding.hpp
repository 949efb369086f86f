#pragma once

// Implicit duration coding: (content index k, duration d) <-> one extended
// token ID via id = (d - 1) * K + k. The extended vocabulary has K * s_max
// IDs; IDs are stored as unsigned 32-bit in streams.

#include <cstdint>
#include <string>
#include <utility>

#include "varstok/error.hpp"

namespace varstok {

using ExtendedToken = std::uint32_t;

struct CodingSpace {
  std::uint32_t codebook_size = 4096; // K
  std::uint32_t s_max = 4;

  std::uint64_t vocab_size() const {
    return static_cast<std::uint64_t>(codebook_size) * s_max;
  }

  friend bool operator==(const CodingSpace&, const CodingSpace&) = default;
};

inline void validate(const CodingSpace& space) {
  static const std::string module = "duration_coding";
  if (space.codebook_size < 1) fail(errc::invalid_argument, module, "K must be >= 1");
  if (space.s_max < 1) fail(errc::invalid_argument, module, "s_max must be >= 1");
  if (space.vocab_size() > (std::uint64_t{1} << 32))
    fail(errc::invalid_argument, module, "K * s_max exceeds the 32-bit ID space");
}

inline ExtendedToken encode_id(std::uint32_t k, std::uint32_t d,
                               const CodingSpace& space) {
  static const std::string module = "duration_coding";
  validate(space);
  if (k >= space.codebook_size)
    fail(errc::invalid_argument, module,
         "content index " + std::to_string(k) + " out of range for K=" +
             std::to_string(space.codebook_size));
  if (d < 1 || d > space.s_max)
    fail(errc::invalid_argument, module,
         "duration " + std::to_string(d) + " out of range for s_max=" +
             std::to_string(space.s_max));
  const std::uint64_t id =
      static_cast<std::uint64_t>(d - 1) * space.codebook_size + k;
  return static_cast<ExtendedToken>(id);
}

// Returns (content index k, duration d).
inline std::pair<std::uint32_t, std::uint32_t> decode_id(ExtendedToken id,
                                                         const CodingSpace& space) {
  static const std::string module = "duration_coding";
  validate(space);
  if (static_cast<std::uint64_t>(id) >= space.vocab_size())
    fail(errc::invalid_argument, module,
         "token ID " + std::to_string(id) + " out of range for vocabulary " +
             std::to_string(space.vocab_size()));
  const std::uint32_t d = id / space.codebook_size + 1;
  const std::uint32_t k = id % space.codebook_size;
  return {k, d};
}

inline std::uint64_t vocab_size(const CodingSpace& space) {
  validate(space);
  return space.vocab_size();
}

} // namespace varstok
