#pragma once

// Minimal RIFF/WAVE reader for PCM input: 16-bit integer or 32-bit float,
// mono or multichannel. Multichannel audio is averaged down to mono and
// samples are scaled to [-1, 1]. A small 16-bit mono writer is included for
// tooling and tests.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "varstok/binary_io.hpp"
#include "varstok/error.hpp"

namespace varstok {

struct Waveform {
  std::vector<float> samples;
  std::uint32_t sample_rate = 0;

  double duration_sec() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

inline Waveform load_audio(const std::string& path) {
  static const std::string module = "frontend";
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, module, "cannot open audio file: " + path);

  detail::expect_magic(is, "RIFF", module);
  detail::read_u32le(is, module); // riff size, unused
  detail::expect_magic(is, "WAVE", module);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::vector<unsigned char> payload;

  while (true) {
    char id[4];
    if (!is.read(id, 4)) break;
    std::uint32_t size = detail::read_u32le(is, module);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) fail(errc::bad_format, module, "fmt chunk too small");
      format = detail::read_u16le(is, module);
      channels = detail::read_u16le(is, module);
      sample_rate = detail::read_u32le(is, module);
      detail::read_u32le(is, module); // byte rate
      detail::read_u16le(is, module); // block align
      bits = detail::read_u16le(is, module);
      is.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      payload.resize(size);
      if (size > 0) detail::read_bytes(is, payload.data(), size, module);
    } else {
      is.ignore(size);
    }
    if (size % 2 == 1) is.ignore(1); // chunks are word-aligned
  }

  if (!have_fmt) fail(errc::bad_format, module, "missing fmt chunk");
  if (channels == 0 || sample_rate == 0)
    fail(errc::bad_format, module, "invalid fmt chunk");

  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    fail(errc::bad_format, module,
         "unsupported encoding (need 16-bit PCM or 32-bit float)");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = payload.size() / frame_bytes;
  if (n_frames == 0) fail(errc::bad_format, module, "zero-length audio");

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n_frames);
  const unsigned char* p = payload.data();
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = p + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        auto v = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        acc += v / 32768.0;
      } else {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(s[b]) << (8 * b);
        acc += std::bit_cast<float>(u);
      }
    }
    w.samples[i] = static_cast<float>(acc / channels);
  }
  return w;
}

// 16-bit mono PCM writer; values are clipped to [-1, 1].
inline void write_wav16(const std::string& path, const Waveform& w) {
  static const std::string module = "frontend";
  if (w.sample_rate == 0) fail(errc::invalid_argument, module, "sample rate must be > 0");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, module, "cannot write audio file: " + path);

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  detail::write_bytes(os, "RIFF", 4);
  detail::write_u32le(os, 36 + data_bytes);
  detail::write_bytes(os, "WAVE", 4);
  detail::write_bytes(os, "fmt ", 4);
  detail::write_u32le(os, 16);
  detail::write_u16le(os, 1); // PCM
  detail::write_u16le(os, 1); // mono
  detail::write_u32le(os, w.sample_rate);
  detail::write_u32le(os, w.sample_rate * 2);
  detail::write_u16le(os, 2);
  detail::write_u16le(os, 16);
  detail::write_bytes(os, "data", 4);
  detail::write_u32le(os, data_bytes);
  for (float v : w.samples) {
    float c = v < -1.0f ? -1.0f : (v > 1.0f ? 1.0f : v);
    auto q = static_cast<std::int16_t>(std::lrint(c * 32767.0f));
    detail::write_u16le(os, static_cast<std::uint16_t>(q));
  }
  if (!os) fail(errc::io, module, "write failed: " + path);
}

} // namespace varstok
