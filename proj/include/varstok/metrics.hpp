#pragma once

// Rate, bitrate, distortion, and duration-distribution statistics. Bitrate is
// computed from the vocabulary-size formula (frame_rate * log2(K * s_max) for
// duration-coded streams, frame_rate * log2(K) for fixed-rate baselines), not
// from serialized file size.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "varstok/duration_coding.hpp"
#include "varstok/error.hpp"
#include "varstok/matrix.hpp"
#include "varstok/token_stream.hpp"

namespace varstok {

struct RateReport {
  std::uint64_t total_tokens = 0;
  double total_seconds = 0.0;
  double frame_rate_hz = 0.0;
  double bitrate_kbps = 0.0;
  std::vector<std::uint64_t> duration_histogram; // index i holds d = i + 1
  std::optional<double> mean_distortion;         // per-entry MSE
  std::optional<double> mean_cosine;             // per-frame cosine
  CodingSpace space;
};

// Pooled average token rate: total tokens / total seconds across the corpus.
// When every stream shares the same frame clock the ratio is computed from
// exact integer totals, so e.g. an s_max = 1 corpus reports the base frame
// rate exactly.
inline double frame_rate(std::span<const TokenStream> streams) {
  static const std::string module = "metrics";
  if (streams.empty()) fail(errc::invalid_argument, module, "empty corpus");
  std::uint64_t tokens = 0, frames = 0;
  bool uniform_clock = true;
  const FrameRate clock = streams.front().base_frame_rate.reduced();
  double seconds = 0.0;
  for (const TokenStream& ts : streams) {
    tokens += ts.tokens.size();
    frames += ts.total_frames();
    seconds += ts.source_duration_sec;
    if (!(ts.base_frame_rate.reduced() == clock)) uniform_clock = false;
  }
  if (uniform_clock) {
    if (frames == 0) fail(errc::invalid_argument, module, "corpus has zero duration");
    return static_cast<double>(tokens * clock.num) /
           static_cast<double>(frames * clock.den);
  }
  if (!(seconds > 0.0)) fail(errc::invalid_argument, module, "corpus has zero duration");
  return static_cast<double>(tokens) / seconds;
}

inline double total_seconds(std::span<const TokenStream> streams) {
  double seconds = 0.0;
  for (const TokenStream& ts : streams) seconds += ts.source_duration_sec;
  return seconds;
}

// Bitrate = frame_rate * log2(K * s_max), reported in kbps.
inline double bitrate_kbps(double frame_rate_hz, const CodingSpace& space) {
  static const std::string module = "metrics";
  validate(space);
  if (!(frame_rate_hz >= 0.0))
    fail(errc::invalid_argument, module, "frame rate must be >= 0");
  return frame_rate_hz * std::log2(static_cast<double>(space.vocab_size())) / 1000.0;
}

// Baseline bitrate = frame_rate * log2(K), for tokenizers without duration
// coding.
inline double baseline_bitrate_kbps(double frame_rate_hz, std::uint32_t k) {
  static const std::string module = "metrics";
  if (k < 1) fail(errc::invalid_argument, module, "K must be >= 1");
  if (!(frame_rate_hz >= 0.0))
    fail(errc::invalid_argument, module, "frame rate must be >= 0");
  return frame_rate_hz * std::log2(static_cast<double>(k)) / 1000.0;
}

// Returns (mean squared error over all entries, mean per-frame cosine).
// Rows with zero norm on either side contribute cosine 0.
inline std::pair<double, double> embedding_distortion(const FrameMatrix& x,
                                                      const FrameMatrix& xhat) {
  static const std::string module = "metrics";
  if (x.t() != xhat.t() || x.h() != xhat.h())
    fail(errc::dimension_mismatch, module, "shape mismatch between X and Xhat");
  if (x.t() == 0 || x.h() == 0)
    fail(errc::invalid_argument, module, "empty matrices");
  double sq = 0.0, cos_sum = 0.0;
  for (std::size_t i = 0; i < x.t(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < x.h(); ++j) {
      const double a = x.frames.at(i, j);
      const double b = xhat.frames.at(i, j);
      const double diff = a - b;
      sq += diff * diff;
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    if (na > 0.0 && nb > 0.0) cos_sum += dot / (std::sqrt(na) * std::sqrt(nb));
  }
  const double mse = sq / (static_cast<double>(x.t()) * x.h());
  return {mse, cos_sum / static_cast<double>(x.t())};
}

// Counts of decoded durations; index i holds d = i + 1. Sized to the largest
// s_max across the corpus; sums to the total token count.
inline std::vector<std::uint64_t> duration_histogram(
    std::span<const TokenStream> streams) {
  std::uint32_t max_span = 1;
  for (const TokenStream& ts : streams)
    max_span = std::max(max_span, ts.space.s_max);
  std::vector<std::uint64_t> hist(max_span, 0);
  for (const TokenStream& ts : streams)
    for (ExtendedToken id : ts.tokens)
      ++hist[decode_id(id, ts.space).second - 1];
  return hist;
}

inline RateReport build_report(std::span<const TokenStream> streams) {
  static const std::string module = "metrics";
  if (streams.empty()) fail(errc::invalid_argument, module, "empty corpus");
  RateReport r;
  r.space = streams.front().space;
  for (const TokenStream& ts : streams) {
    if (!(ts.space == r.space))
      fail(errc::invalid_argument, module, "streams use different coding spaces");
    r.total_tokens += ts.tokens.size();
  }
  r.total_seconds = total_seconds(streams);
  r.frame_rate_hz = frame_rate(streams);
  r.bitrate_kbps = bitrate_kbps(r.frame_rate_hz, r.space);
  r.duration_histogram = duration_histogram(streams);
  return r;
}

inline nlohmann::json to_json(const RateReport& r) {
  nlohmann::json j;
  j["total_tokens"] = r.total_tokens;
  j["total_seconds"] = r.total_seconds;
  j["frame_rate_hz"] = r.frame_rate_hz;
  j["bitrate_kbps"] = r.bitrate_kbps;
  j["space"] = {{"codebook_size", r.space.codebook_size}, {"s_max", r.space.s_max}};
  auto& hist = j["duration_histogram"] = nlohmann::json::object();
  for (std::size_t i = 0; i < r.duration_histogram.size(); ++i)
    hist[std::to_string(i + 1)] = r.duration_histogram[i];
  if (r.mean_distortion) j["mean_distortion"] = *r.mean_distortion;
  if (r.mean_cosine) j["mean_cosine"] = *r.mean_cosine;
  return j;
}

// Aligned text table; kbps and Hz shown with two decimals.
inline std::string to_table(const RateReport& r) {
  std::ostringstream os;
  os << std::fixed;
  os << std::setw(18) << std::left << "total_tokens" << r.total_tokens << '\n';
  os << std::setw(18) << std::left << "total_seconds" << std::setprecision(3)
     << r.total_seconds << '\n';
  os << std::setw(18) << std::left << "frame_rate_hz" << std::setprecision(2)
     << r.frame_rate_hz << '\n';
  os << std::setw(18) << std::left << "bitrate_kbps" << std::setprecision(2)
     << r.bitrate_kbps << '\n';
  os << std::setw(18) << std::left << "vocab_size" << r.space.vocab_size() << '\n';
  if (r.mean_distortion)
    os << std::setw(18) << std::left << "mean_distortion" << std::setprecision(6)
       << *r.mean_distortion << '\n';
  if (r.mean_cosine)
    os << std::setw(18) << std::left << "mean_cosine" << std::setprecision(6)
       << *r.mean_cosine << '\n';
  os << "duration_histogram\n";
  for (std::size_t i = 0; i < r.duration_histogram.size(); ++i)
    os << "  d=" << (i + 1) << std::setw(14 - (i + 1 >= 10 ? 1 : 0)) << std::right
       << r.duration_histogram[i] << '\n';
  return os.str();
}

inline std::string histogram_csv(const RateReport& r) {
  std::ostringstream os;
  os << "duration,count\n";
  for (std::size_t i = 0; i < r.duration_histogram.size(); ++i)
    os << (i + 1) << ',' << r.duration_histogram[i] << '\n';
  return os.str();
}

inline std::string per_utterance_csv(
    std::span<const std::pair<std::string, TokenStream>> named) {
  std::ostringstream os;
  os << "name,tokens,seconds,frame_rate_hz\n";
  os << std::setprecision(10);
  for (const auto& [name, ts] : named) {
    const TokenStream one[] = {ts};
    os << name << ',' << ts.tokens.size() << ',' << ts.source_duration_sec << ','
       << frame_rate(one) << '\n';
  }
  return os.str();
}

} // namespace varstok
