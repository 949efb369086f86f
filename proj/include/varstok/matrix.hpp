#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "varstok/error.hpp"

namespace varstok {

// Row-major float matrix; frames are rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Frames per second as an exact ratio, e.g. 75/1 for a 24 kHz, hop-320 frontend.
struct FrameRate {
  std::uint32_t num = 75;
  std::uint32_t den = 1;

  double hz() const { return static_cast<double>(num) / static_cast<double>(den); }

  FrameRate reduced() const {
    std::uint32_t g = std::gcd(num, den);
    return g ? FrameRate{num / g, den / g} : *this;
  }

  friend bool operator==(const FrameRate&, const FrameRate&) = default;
};

// T x H sequence of frame-level feature vectors at a known base frame rate.
// source_duration_sec records the seconds of audio the frames represent; for
// frames derived from embedding files it is the frame-grid duration T/rate.
struct FrameMatrix {
  Matrix frames;
  FrameRate base_frame_rate{75, 1};
  double source_duration_sec = 0.0;

  std::size_t t() const { return frames.rows; }
  std::size_t h() const { return frames.cols; }
};

inline void validate_frame_matrix(const FrameMatrix& x, const std::string& module) {
  if (x.t() < 1 || x.h() < 1)
    fail(errc::invalid_argument, module, "frame matrix must have T >= 1 and H >= 1");
  if (x.frames.data.size() != x.t() * x.h())
    fail(errc::invalid_argument, module, "frame matrix storage size mismatch");
  if (!x.frames.all_finite())
    fail(errc::invalid_argument, module, "frame matrix contains non-finite values");
  if (x.base_frame_rate.num == 0 || x.base_frame_rate.den == 0)
    fail(errc::invalid_argument, module, "base frame rate must be positive");
}

} // namespace varstok
