#pragma once

// Deterministic log-mel frontend plus embedding-file ingestion. Either path
// produces a FrameMatrix; the rest of the pipeline does not care where the
// features came from.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "varstok/binary_io.hpp"
#include "varstok/error.hpp"
#include "varstok/matrix.hpp"
#include "varstok/wav.hpp"

namespace varstok {

struct FrontendConfig {
  std::uint32_t fft_size = 1024; // power of two
  std::uint32_t hop_size = 320;  // 24 kHz / 320 = 75 Hz base frame rate
  std::uint32_t mel_bands = 80;  // H for audio input
  float log_floor = 1e-5f;
  std::string window = "hann"; // "hann" or "rect"
};

inline void validate(const FrontendConfig& cfg) {
  static const std::string module = "frontend";
  if (cfg.hop_size == 0) fail(errc::invalid_argument, module, "hop_size must be > 0");
  if (cfg.fft_size < cfg.hop_size)
    fail(errc::invalid_argument, module, "fft_size must be >= hop_size");
  if ((cfg.fft_size & (cfg.fft_size - 1)) != 0)
    fail(errc::invalid_argument, module, "fft_size must be a power of two");
  if (cfg.mel_bands < 1 || cfg.mel_bands > cfg.fft_size / 2)
    fail(errc::invalid_argument, module, "mel_bands must be in [1, fft_size/2]");
  if (!(cfg.log_floor > 0.0f))
    fail(errc::invalid_argument, module, "log_floor must be > 0");
  if (cfg.window != "hann" && cfg.window != "rect")
    fail(errc::invalid_argument, module, "unknown window: " + cfg.window);
}

namespace detail {

// Iterative radix-2 Cooley-Tukey; a.size() must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank over FFT bins 0..fft/2, HTK mel scale, spanning
// 0..sample_rate/2. Returns bands x (fft/2+1) weights.
inline std::vector<std::vector<double>> mel_filterbank(std::uint32_t bands,
                                                       std::uint32_t fft_size,
                                                       std::uint32_t sample_rate) {
  const std::size_t n_bins = fft_size / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / (bands + 1));

  std::vector<std::vector<double>> fb(bands, std::vector<double>(n_bins, 0.0));
  for (std::uint32_t b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb[b][k] = w;
    }
  }
  return fb;
}

} // namespace detail

// Log-mel magnitude frames with reflect center padding. Frame t is centered at
// sample t*hop, so T = ceil(len/hop) and base_frame_rate = sample_rate/hop.
inline FrameMatrix compute_frames(const Waveform& w, const FrontendConfig& cfg) {
  static const std::string module = "frontend";
  validate(cfg);
  const std::size_t len = w.samples.size();
  if (len == 0) fail(errc::invalid_argument, module, "empty waveform");
  if (w.sample_rate == 0) fail(errc::invalid_argument, module, "sample rate must be > 0");
  const std::size_t pad = cfg.fft_size / 2;
  if (len <= pad)
    fail(errc::invalid_argument, module,
         "signal too short for configured fft/hop (need more than fft_size/2 samples)");

  const std::size_t t_count = (len + cfg.hop_size - 1) / cfg.hop_size;
  const std::size_t n_bins = cfg.fft_size / 2 + 1;

  std::vector<double> window(cfg.fft_size, 1.0);
  if (cfg.window == "hann")
    for (std::size_t i = 0; i < cfg.fft_size; ++i)
      window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.fft_size);

  const auto fb = detail::mel_filterbank(cfg.mel_bands, cfg.fft_size, w.sample_rate);
  const double floor_log = std::log(static_cast<double>(cfg.log_floor));

  FrameMatrix out;
  out.frames = Matrix(t_count, cfg.mel_bands);
  out.base_frame_rate = FrameRate{w.sample_rate, cfg.hop_size}.reduced();
  out.source_duration_sec = static_cast<double>(len) / w.sample_rate;

  std::vector<std::complex<double>> buf(cfg.fft_size);
  std::vector<double> mag(n_bins);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(t * cfg.hop_size);
    for (std::size_t i = 0; i < cfg.fft_size; ++i) {
      std::ptrdiff_t idx = center - static_cast<std::ptrdiff_t>(pad) +
                           static_cast<std::ptrdiff_t>(i);
      if (idx < 0) idx = -idx;
      if (idx >= static_cast<std::ptrdiff_t>(len))
        idx = 2 * static_cast<std::ptrdiff_t>(len - 1) - idx;
      buf[i] = {w.samples[static_cast<std::size_t>(idx)] * window[i], 0.0};
    }
    detail::fft_inplace(buf);
    for (std::size_t k = 0; k < n_bins; ++k) mag[k] = std::abs(buf[k]);
    for (std::uint32_t b = 0; b < cfg.mel_bands; ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) acc += fb[b][k] * mag[k];
      const double v = acc > cfg.log_floor ? std::log(acc) : floor_log;
      out.frames.at(t, b) = static_cast<float>(v);
    }
  }
  return out;
}

// --- embedding files -------------------------------------------------------
//
// Binary layout (magic "VSEB"): version u16, H u32, base_frame_rate num/den
// u32 pair, T u64, then T*H little-endian f32 row-major. CSV alternative: one
// frame per line, comma-separated; the caller supplies the base frame rate.

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;

inline void write_embeddings_vseb(const std::string& path, const FrameMatrix& x) {
  static const std::string module = "frontend";
  validate_frame_matrix(x, module);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, module, "cannot write embedding file: " + path);
  detail::write_bytes(os, "VSEB", 4);
  detail::write_u16le(os, kEmbeddingFormatVersion);
  detail::write_u32le(os, static_cast<std::uint32_t>(x.h()));
  detail::write_u32le(os, x.base_frame_rate.num);
  detail::write_u32le(os, x.base_frame_rate.den);
  detail::write_u64le(os, x.t());
  for (float v : x.frames.data) detail::write_f32le(os, v);
  if (!os) fail(errc::io, module, "write failed: " + path);
}

inline void write_embeddings_csv(const std::string& path, const FrameMatrix& x) {
  static const std::string module = "frontend";
  validate_frame_matrix(x, module);
  std::ofstream os(path);
  if (!os) fail(errc::io, module, "cannot write embedding file: " + path);
  os.precision(9); // round-trips f32 exactly
  for (std::size_t t = 0; t < x.t(); ++t) {
    for (std::size_t j = 0; j < x.h(); ++j) {
      if (j) os << ',';
      os << x.frames.at(t, j);
    }
    os << '\n';
  }
  if (!os) fail(errc::io, module, "write failed: " + path);
}

namespace detail {

inline FrameMatrix load_embeddings_vseb(std::ifstream& is, std::size_t expected_h) {
  static const std::string module = "frontend";
  const std::uint16_t version = read_u16le(is, module); // magic already consumed

  if (version != kEmbeddingFormatVersion)
    fail(errc::bad_format, module, "unsupported VSEB version");
  const std::uint32_t h = read_u32le(is, module);
  const std::uint32_t num = read_u32le(is, module);
  const std::uint32_t den = read_u32le(is, module);
  const std::uint64_t t = read_u64le(is, module);
  if (h == 0) fail(errc::bad_format, module, "VSEB header: H must be >= 1");
  if (num == 0 || den == 0)
    fail(errc::bad_format, module, "VSEB header: base frame rate must be positive");
  if (t == 0) fail(errc::bad_format, module, "empty embedding file");
  if (expected_h != 0 && expected_h != h)
    fail(errc::bad_format, module, "row-length mismatch: expected H=" +
                                       std::to_string(expected_h) + ", file has H=" +
                                       std::to_string(h));
  FrameMatrix out;
  out.frames = Matrix(t, h);
  for (float& v : out.frames.data) v = read_f32le(is, module);
  if (!out.frames.all_finite())
    fail(errc::bad_format, module, "embedding file contains non-finite values");
  out.base_frame_rate = FrameRate{num, den};
  out.source_duration_sec = static_cast<double>(t) * den / num;
  return out;
}

inline FrameMatrix load_embeddings_csv(const std::string& path, std::size_t expected_h,
                                       FrameRate rate) {
  static const std::string module = "frontend";
  std::ifstream is(path);
  if (!is) fail(errc::io, module, "cannot open embedding file: " + path);
  std::vector<float> values;
  std::size_t h = expected_h;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t cols = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      const char* comma = std::find(p, end, ',');
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(p, comma, v);
      if (ec != std::errc() || ptr != comma)
        fail(errc::bad_format, module, "CSV parse error at line " + std::to_string(rows + 1));
      if (!std::isfinite(v))
        fail(errc::bad_format, module, "embedding file contains non-finite values");
      values.push_back(v);
      ++cols;
      p = comma == end ? end : comma + 1;
    }
    if (h == 0) h = cols;
    if (cols != h)
      fail(errc::bad_format, module, "row-length mismatch at line " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) fail(errc::bad_format, module, "empty embedding file");
  FrameMatrix out;
  out.frames.rows = rows;
  out.frames.cols = h;
  out.frames.data = std::move(values);
  out.base_frame_rate = rate;
  out.source_duration_sec = static_cast<double>(rows) * rate.den / rate.num;
  return out;
}

} // namespace detail

// Loads a VSEB binary or CSV embedding file. expected_h = 0 accepts any H.
// For CSV input the base frame rate must come from the caller; the VSEB header
// carries its own and the argument is ignored.
inline FrameMatrix load_embeddings(const std::string& path, std::size_t expected_h = 0,
                                   std::optional<FrameRate> rate = std::nullopt) {
  static const std::string module = "frontend";
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, module, "cannot open embedding file: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  if (is.gcount() == 4 && std::memcmp(magic, "VSEB", 4) == 0)
    return detail::load_embeddings_vseb(is, expected_h);
  is.close();
  if (!rate)
    fail(errc::invalid_argument, module,
         "CSV embeddings need an explicit base frame rate");
  if (rate->num == 0 || rate->den == 0)
    fail(errc::invalid_argument, module, "base frame rate must be positive");
  return detail::load_embeddings_csv(path, expected_h, *rate);
}

} // namespace varstok
