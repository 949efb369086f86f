#pragma once

// Temporal-aware density peak clustering: every frame gets a peak score
// s_i = rho_i * delta_i, then clusters grow greedily from the highest-scoring
// unassigned seed, one frame at a time, alternating forward/backward, until a
// similarity test fails or the span cap is hit. Clusters are always
// temporally contiguous and tile [0, T) exactly.
//
// All similarity computations run on L2-normalized copies of the frames in a
// fixed order; pooling uses the original frames. Zero-norm frames keep a zero
// normalized vector, which lands the similarity convention phi = 0.5.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "varstok/error.hpp"
#include "varstok/matrix.hpp"

namespace varstok {

// tau and beta are stored as f32 to match the stream header exactly.
struct ClusterParams {
  std::uint32_t m = 5;     // neighbor count for local density
  float tau = 0.7f;        // similarity threshold in (0, 1)
  float beta = 0.2f;       // peak-score penalty >= 0
  std::uint32_t s_max = 4; // maximum cluster span in frames

  friend bool operator==(const ClusterParams&, const ClusterParams&) = default;
};

inline void validate(const ClusterParams& p) {
  static const std::string module = "clustering";
  if (!(p.tau > 0.0f && p.tau < 1.0f))
    fail(errc::invalid_argument, module, "tau must be in (0, 1)");
  if (!(p.beta >= 0.0f)) fail(errc::invalid_argument, module, "beta must be >= 0");
  if (p.m < 1) fail(errc::invalid_argument, module, "m must be >= 1");
  if (p.s_max < 1) fail(errc::invalid_argument, module, "s_max must be >= 1");
}

struct PeakScores {
  std::vector<double> rho;   // local densities, in [1, e]
  std::vector<double> delta; // peak distances, in [0, 1]
  std::vector<double> s;     // s_i = rho_i * delta_i
};

struct Cluster {
  std::size_t start = 0;
  std::uint32_t duration = 0;
  std::size_t seed = 0;
};

struct Segmentation {
  std::vector<Cluster> clusters; // sorted by start; spans tile [0, T)
  std::size_t total_frames = 0;
};

inline void validate(const Segmentation& seg) {
  static const std::string module = "clustering";
  std::size_t cursor = 0;
  for (const Cluster& c : seg.clusters) {
    if (c.start != cursor)
      fail(errc::invalid_argument, module, "segmentation spans must tile [0, T)");
    if (c.duration < 1)
      fail(errc::invalid_argument, module, "cluster duration must be >= 1");
    if (c.seed < c.start || c.seed >= c.start + c.duration)
      fail(errc::invalid_argument, module, "cluster seed outside its span");
    cursor += c.duration;
  }
  if (cursor != seg.total_frames)
    fail(errc::invalid_argument, module, "durations do not sum to total_frames");
}

namespace detail {

// Frames normalized to unit L2 norm, stored as doubles; zero rows stay zero.
inline std::vector<double> normalize_rows(const Matrix& x) {
  std::vector<double> out(x.rows * x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double v = x.at(i, j);
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    for (std::size_t j = 0; j < x.cols; ++j)
      out[i * x.cols + j] = norm > 0.0 ? x.at(i, j) / norm : 0.0;
  }
  return out;
}

// phi on already-normalized vectors: (1 + <a, b>) / 2, clamped to [0, 1].
inline double phi_normalized(const double* a, const double* b, std::size_t h) {
  double dot = 0.0;
  for (std::size_t j = 0; j < h; ++j) dot += a[j] * b[j];
  double phi = 0.5 * (1.0 + dot);
  return phi < 0.0 ? 0.0 : (phi > 1.0 ? 1.0 : phi);
}

inline std::vector<double> local_density_normalized(const std::vector<double>& norm,
                                                    std::size_t t, std::size_t h,
                                                    std::uint32_t m) {
  std::vector<double> rho(t, 1.0);
  if (t == 1) return rho;
  const std::size_t m_eff = std::min<std::size_t>(m, t - 1);
  std::vector<double> sims(t - 1);
  for (std::size_t i = 0; i < t; ++i) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < t; ++j) {
      if (j == i) continue;
      sims[n++] = phi_normalized(&norm[i * h], &norm[j * h], h);
    }
    std::nth_element(sims.begin(), sims.begin() + (m_eff - 1), sims.end(),
                     std::greater<double>());
    double acc = 0.0;
    for (std::size_t k = 0; k < m_eff; ++k) acc += sims[k];
    rho[i] = std::exp(acc / static_cast<double>(m_eff));
  }
  return rho;
}

inline std::vector<double> peak_distance_normalized(const std::vector<double>& norm,
                                                    std::size_t t, std::size_t h,
                                                    const std::vector<double>& rho) {
  std::vector<double> delta(t, 1.0);
  if (t == 1) return delta; // convention for a single frame
  for (std::size_t i = 0; i < t; ++i) {
    double min_higher = std::numeric_limits<double>::infinity();
    double max_all = 0.0;
    bool has_higher = false;
    for (std::size_t j = 0; j < t; ++j) {
      if (j == i) continue;
      const double d = 1.0 - phi_normalized(&norm[i * h], &norm[j * h], h);
      if (rho[j] > rho[i]) { // strictly greater; ties fall to the max branch
        has_higher = true;
        min_higher = std::min(min_higher, d);
      }
      max_all = std::max(max_all, d);
    }
    delta[i] = has_higher ? min_higher : max_all;
  }
  return delta;
}

} // namespace detail

// Normalized cosine similarity phi = (1 + cos(a, b)) / 2 in [0, 1]; a zero
// vector is assigned cosine 0, i.e. phi = 0.5.
inline double similarity(std::span<const float> a, std::span<const float> b) {
  static const std::string module = "clustering";
  if (a.size() != b.size())
    fail(errc::dimension_mismatch, module, "similarity: vector lengths differ");
  if (a.empty()) fail(errc::invalid_argument, module, "similarity: empty vectors");
  double sq_a = 0.0, sq_b = 0.0, dot = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (!std::isfinite(a[j]) || !std::isfinite(b[j]))
      fail(errc::invalid_argument, module, "similarity: non-finite input");
    sq_a += static_cast<double>(a[j]) * a[j];
    sq_b += static_cast<double>(b[j]) * b[j];
    dot += static_cast<double>(a[j]) * b[j];
  }
  if (sq_a == 0.0 || sq_b == 0.0) return 0.5;
  double phi = 0.5 * (1.0 + dot / (std::sqrt(sq_a) * std::sqrt(sq_b)));
  return phi < 0.0 ? 0.0 : (phi > 1.0 ? 1.0 : phi);
}

// rho_i = exp(mean over the min(m, T-1) most-similar other frames of phi);
// rho = 1 for T = 1.
inline std::vector<double> local_density(const FrameMatrix& x, std::uint32_t m) {
  static const std::string module = "clustering";
  validate_frame_matrix(x, module);
  if (m < 1) fail(errc::invalid_argument, module, "m must be >= 1");
  const auto norm = detail::normalize_rows(x.frames);
  return detail::local_density_normalized(norm, x.t(), x.h(), m);
}

// delta_i = min over strictly-denser frames of 1 - phi; the global density
// maximum takes the max over all other frames instead. delta = 1 for T = 1.
inline std::vector<double> peak_distance(const FrameMatrix& x,
                                         const std::vector<double>& rho) {
  static const std::string module = "clustering";
  validate_frame_matrix(x, module);
  if (rho.size() != x.t())
    fail(errc::dimension_mismatch, module, "peak_distance: rho length != T");
  const auto norm = detail::normalize_rows(x.frames);
  return detail::peak_distance_normalized(norm, x.t(), x.h(), rho);
}

inline PeakScores peak_scores(std::vector<double> rho, std::vector<double> delta) {
  static const std::string module = "clustering";
  if (rho.size() != delta.size())
    fail(errc::dimension_mismatch, module, "peak_scores: length mismatch");
  PeakScores ps;
  ps.s.resize(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) ps.s[i] = rho[i] * delta[i];
  ps.rho = std::move(rho);
  ps.delta = std::move(delta);
  return ps;
}

// Normalized frames plus their peak scores; lets callers sweep tau/beta/s_max
// without recomputing the O(T^2) similarity pass.
struct ScoredFrames {
  std::size_t t = 0;
  std::size_t h = 0;
  std::vector<double> normalized; // T x H, unit rows (zero rows stay zero)
  PeakScores scores;
};

inline ScoredFrames score_frames(const FrameMatrix& x, std::uint32_t m) {
  static const std::string module = "clustering";
  validate_frame_matrix(x, module);
  if (m < 1) fail(errc::invalid_argument, module, "m must be >= 1");
  ScoredFrames sf;
  sf.t = x.t();
  sf.h = x.h();
  sf.normalized = detail::normalize_rows(x.frames);
  auto rho = detail::local_density_normalized(sf.normalized, sf.t, sf.h, m);
  auto delta = detail::peak_distance_normalized(sf.normalized, sf.t, sf.h, rho);
  sf.scores = peak_scores(std::move(rho), std::move(delta));
  return sf;
}

// Greedy cluster growth. Seeds are taken in decreasing peak-score order
// (ties: lowest frame index). Expansion alternates forward/backward starting
// forward; a candidate is admitted iff it is unassigned, adjacent to the
// cluster, phi(seed, candidate) - beta * s_candidate > tau, and the span is
// still below s_max. A direction that fails once is closed for that cluster.
inline Segmentation segment(const ScoredFrames& sf, const ClusterParams& p) {
  validate(p);
  const std::size_t t_count = sf.t;
  const std::size_t h = sf.h;
  const auto& s = sf.scores.s;

  std::vector<std::size_t> order(t_count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&s](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  std::vector<bool> assigned(t_count, false);
  std::vector<Cluster> clusters;
  const double* norm = sf.normalized.data();

  const double tau = p.tau, beta = p.beta;
  auto admit = [&](std::size_t seed, std::size_t cand) {
    const double phi = detail::phi_normalized(norm + seed * h, norm + cand * h, h);
    return phi - beta * s[cand] > tau;
  };

  for (std::size_t seed : order) {
    if (assigned[seed]) continue;
    std::size_t lo = seed, hi = seed;
    std::uint32_t span = 1;
    bool fwd_open = true, bwd_open = true;
    while ((fwd_open || bwd_open) && span < p.s_max) {
      if (fwd_open) {
        const std::size_t cand = hi + 1;
        if (cand >= t_count || assigned[cand] || !admit(seed, cand)) {
          fwd_open = false;
        } else {
          hi = cand;
          ++span;
          if (span == p.s_max) break;
        }
      }
      if (bwd_open && span < p.s_max) {
        if (lo == 0 || assigned[lo - 1] || !admit(seed, lo - 1)) {
          bwd_open = false;
        } else {
          --lo;
          ++span;
        }
      }
    }
    for (std::size_t i = lo; i <= hi; ++i) assigned[i] = true;
    clusters.push_back(Cluster{lo, span, seed});
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.start < b.start; });
  Segmentation seg{std::move(clusters), t_count};
  validate(seg);
  return seg;
}

inline Segmentation segment(const FrameMatrix& x, const ClusterParams& p) {
  return segment(score_frames(x, p.m), p);
}

struct PooledClusters {
  Matrix z;                             // N x H mean-pooled embeddings
  std::vector<std::uint32_t> durations; // d_n, sums to T
};

// Row n of z is the arithmetic mean of the original (unnormalized) frames in
// cluster n.
inline PooledClusters pool(const FrameMatrix& x, const Segmentation& seg) {
  static const std::string module = "clustering";
  validate_frame_matrix(x, module);
  validate(seg);
  if (seg.total_frames != x.t())
    fail(errc::dimension_mismatch, module, "segmentation does not match frame count");

  PooledClusters out;
  out.z = Matrix(seg.clusters.size(), x.h());
  out.durations.reserve(seg.clusters.size());
  for (std::size_t n = 0; n < seg.clusters.size(); ++n) {
    const Cluster& c = seg.clusters[n];
    for (std::size_t j = 0; j < x.h(); ++j) {
      double acc = 0.0;
      for (std::size_t i = c.start; i < c.start + c.duration; ++i)
        acc += x.frames.at(i, j);
      out.z.at(n, j) = static_cast<float>(acc / c.duration);
    }
    out.durations.push_back(c.duration);
  }
  return out;
}

inline nlohmann::json to_json(const Segmentation& seg, const ClusterParams& p) {
  nlohmann::json j;
  j["total_frames"] = seg.total_frames;
  j["params"] = {{"m", p.m}, {"tau", p.tau}, {"beta", p.beta}, {"s_max", p.s_max}};
  auto& arr = j["clusters"] = nlohmann::json::array();
  for (const Cluster& c : seg.clusters)
    arr.push_back({{"start", c.start}, {"duration", c.duration}, {"seed", c.seed}});
  return j;
}

} // namespace varstok
