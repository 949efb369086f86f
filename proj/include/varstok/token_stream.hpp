#pragma once

// End-to-end tokenize/detokenize pipeline and the bit-exact "VSTK" token
// stream format. tokenize = segment -> pool -> quantize -> duration-code;
// expand repeats each code vector by its decoded duration to restore the
// frame-level sequence.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "varstok/binary_io.hpp"
#include "varstok/clustering.hpp"
#include "varstok/digest.hpp"
#include "varstok/duration_coding.hpp"
#include "varstok/error.hpp"
#include "varstok/matrix.hpp"
#include "varstok/quantizer.hpp"

namespace varstok {

struct TokenStream {
  std::vector<ExtendedToken> tokens;
  CodingSpace space;
  FrameRate base_frame_rate{75, 1};
  Digest codebook_hash{};
  // Frame-grid duration T / base_frame_rate, so that
  // round(source_duration_sec * base_frame_rate) == sum of decoded durations.
  double source_duration_sec = 0.0;
  ClusterParams params;

  std::uint64_t total_frames() const {
    std::uint64_t t = 0;
    for (ExtendedToken id : tokens) t += decode_id(id, space).second;
    return t;
  }
};

inline void validate(const TokenStream& ts) {
  static const std::string module = "stream";
  validate(ts.space);
  validate(ts.params);
  if (ts.base_frame_rate.num == 0 || ts.base_frame_rate.den == 0)
    fail(errc::invalid_argument, module, "base frame rate must be positive");
  if (ts.params.s_max != ts.space.s_max)
    fail(errc::invalid_argument, module, "params.s_max != coding space s_max");
  const std::uint64_t t = ts.total_frames(); // also range-checks every token
  const double expected = ts.source_duration_sec * ts.base_frame_rate.hz();
  if (static_cast<std::uint64_t>(std::llround(expected)) != t)
    fail(errc::invalid_argument, module,
         "decoded durations do not match source duration");
}

inline TokenStream tokenize(const FrameMatrix& x, const Codebook& cb,
                            const ClusterParams& p) {
  static const std::string module = "stream";
  validate_frame_matrix(x, module);
  validate(cb);
  validate(p);
  if (x.h() != cb.h())
    fail(errc::dimension_mismatch, module,
         "frame width H=" + std::to_string(x.h()) + " != codebook H=" +
             std::to_string(cb.h()));

  TokenStream ts;
  ts.space = CodingSpace{static_cast<std::uint32_t>(cb.k()), p.s_max};
  validate(ts.space);
  ts.base_frame_rate = x.base_frame_rate.reduced();
  ts.codebook_hash = cb.content_hash;
  ts.params = p;

  const Segmentation seg = segment(x, p);
  const PooledClusters pooled = pool(x, seg);
  auto [indices, quantized] = quantize_batch(pooled.z, cb);
  (void)quantized;
  ts.tokens.reserve(indices.size());
  for (std::size_t n = 0; n < indices.size(); ++n)
    ts.tokens.push_back(encode_id(indices[n], pooled.durations[n], ts.space));

  ts.source_duration_sec = static_cast<double>(x.t()) * ts.base_frame_rate.den /
                           ts.base_frame_rate.num;
  validate(ts);
  return ts;
}

// Expands tokens back to a frame-level matrix: code vector e_k repeated d
// times per token, in order. The codebook must be the one the stream was
// produced with (hash-checked).
inline FrameMatrix expand(const TokenStream& ts, const Codebook& cb) {
  static const std::string module = "stream";
  validate(cb);
  validate(ts.space);
  if (cb.k() != ts.space.codebook_size)
    fail(errc::dimension_mismatch, module, "codebook size != stream coding space");
  if (cb.content_hash != ts.codebook_hash)
    fail(errc::hash_mismatch, module,
         "codebook hash mismatch: stream was produced with a different codebook");

  std::uint64_t t_total = 0;
  for (ExtendedToken id : ts.tokens) t_total += decode_id(id, ts.space).second;

  FrameMatrix out;
  out.frames = Matrix(t_total, cb.h());
  out.base_frame_rate = ts.base_frame_rate;
  out.source_duration_sec = ts.source_duration_sec;
  std::size_t row = 0;
  for (ExtendedToken id : ts.tokens) {
    auto [k, d] = decode_id(id, ts.space);
    for (std::uint32_t r = 0; r < d; ++r, ++row)
      std::copy(cb.vectors.row(k).begin(), cb.vectors.row(k).end(),
                out.frames.row(row).begin());
  }
  return out;
}

// --- stream file ------------------------------------------------------------
//
// Layout (magic "VSTK", all little-endian): version u16, K u32, s_max u16,
// base_frame_rate num/den u32 pair, source_duration_sec f64, params (m u16,
// tau f32, beta f32), 32-byte codebook hash, N u64, then N u32 token IDs.

inline constexpr std::uint16_t kStreamFormatVersion = 1;

inline void write_stream(const TokenStream& ts, const std::string& path) {
  static const std::string module = "stream";
  validate(ts);
  if (ts.space.s_max > 0xFFFF || ts.params.m > 0xFFFF)
    fail(errc::invalid_argument, module, "s_max and m must fit in 16 bits");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, module, "cannot write stream file: " + path);
  detail::write_bytes(os, "VSTK", 4);
  detail::write_u16le(os, kStreamFormatVersion);
  detail::write_u32le(os, ts.space.codebook_size);
  detail::write_u16le(os, static_cast<std::uint16_t>(ts.space.s_max));
  detail::write_u32le(os, ts.base_frame_rate.num);
  detail::write_u32le(os, ts.base_frame_rate.den);
  detail::write_f64le(os, ts.source_duration_sec);
  detail::write_u16le(os, static_cast<std::uint16_t>(ts.params.m));
  detail::write_f32le(os, ts.params.tau);
  detail::write_f32le(os, ts.params.beta);
  detail::write_bytes(os, ts.codebook_hash.data(), ts.codebook_hash.size());
  detail::write_u64le(os, ts.tokens.size());
  for (ExtendedToken id : ts.tokens) detail::write_u32le(os, id);
  if (!os) fail(errc::io, module, "write failed: " + path);
}

inline TokenStream read_stream(const std::string& path) {
  static const std::string module = "stream";
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, module, "cannot open stream file: " + path);
  detail::expect_magic(is, "VSTK", module);
  const std::uint16_t version = detail::read_u16le(is, module);
  if (version != kStreamFormatVersion)
    fail(errc::bad_format, module, "unsupported VSTK version");
  TokenStream ts;
  ts.space.codebook_size = detail::read_u32le(is, module);
  ts.space.s_max = detail::read_u16le(is, module);
  ts.base_frame_rate.num = detail::read_u32le(is, module);
  ts.base_frame_rate.den = detail::read_u32le(is, module);
  ts.source_duration_sec = detail::read_f64le(is, module);
  ts.params.m = detail::read_u16le(is, module);
  ts.params.tau = detail::read_f32le(is, module);
  ts.params.beta = detail::read_f32le(is, module);
  ts.params.s_max = ts.space.s_max;
  detail::read_bytes(is, ts.codebook_hash.data(), ts.codebook_hash.size(), module);
  const std::uint64_t n = detail::read_u64le(is, module);
  ts.tokens.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) ts.tokens[i] = detail::read_u32le(is, module);
  // Trailing garbage means the length field does not describe the file.
  if (is.peek() != std::ifstream::traits_type::eof())
    fail(errc::bad_format, module, "trailing bytes after token payload");
  validate(ts);
  return ts;
}

inline nlohmann::json to_json(const TokenStream& ts) {
  nlohmann::json j;
  j["space"] = {{"codebook_size", ts.space.codebook_size}, {"s_max", ts.space.s_max}};
  j["base_frame_rate"] = {{"num", ts.base_frame_rate.num}, {"den", ts.base_frame_rate.den}};
  j["source_duration_sec"] = ts.source_duration_sec;
  j["codebook_hash"] = hex(ts.codebook_hash);
  j["params"] = {{"m", ts.params.m},
                 {"tau", ts.params.tau},
                 {"beta", ts.params.beta},
                 {"s_max", ts.params.s_max}};
  auto& toks = j["tokens"] = nlohmann::json::array();
  for (ExtendedToken id : ts.tokens) {
    auto [k, d] = decode_id(id, ts.space);
    toks.push_back({{"id", id}, {"k", k}, {"d", d}});
  }
  return j;
}

} // namespace varstok
