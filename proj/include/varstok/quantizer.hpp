#pragma once

// Single-codebook vector quantizer over pooled cluster embeddings. Lookup is
// an exhaustive nearest-neighbor scan (desk-scale K); learning is EMA
// k-means: per batch, assignment counts and vector sums are folded into
// exponential moving averages and each code becomes ema_sum / ema_count.
// Codes whose EMA count decays below a threshold are "awakened": reset to a
// random vector of the batch that triggered the reset, which prevents
// codebook collapse.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varstok/binary_io.hpp"
#include "varstok/digest.hpp"
#include "varstok/error.hpp"
#include "varstok/matrix.hpp"

namespace varstok {

struct Codebook {
  Matrix vectors;                 // K x H code vectors
  std::vector<double> ema_counts; // K, zero-initialized at training start
  std::vector<double> ema_sums;   // K x H row-major
  float decay = 0.99f;            // EMA decay gamma in (0, 1)
  double awaken_threshold = 0.0;  // resolved at training time
  Digest content_hash{};

  std::size_t k() const { return vectors.rows; }
  std::size_t h() const { return vectors.cols; }

  // content_hash covers the code vectors only (little-endian f32 bytes) and
  // must be recomputed after any mutation.
  void rehash() {
    std::vector<unsigned char> bytes(vectors.data.size() * 4);
    for (std::size_t i = 0; i < vectors.data.size(); ++i) {
      const auto u = std::bit_cast<std::uint32_t>(vectors.data[i]);
      for (int b = 0; b < 4; ++b)
        bytes[i * 4 + b] = static_cast<unsigned char>(u >> (8 * b));
    }
    content_hash = sha256(bytes.data(), bytes.size());
  }
};

inline void validate(const Codebook& cb) {
  static const std::string module = "vq";
  if (cb.k() < 1 || cb.h() < 1)
    fail(errc::invalid_argument, module, "codebook must have K >= 1 and H >= 1");
  if (!cb.vectors.all_finite())
    fail(errc::invalid_argument, module, "codebook contains non-finite values");
  if (!(cb.decay > 0.0f && cb.decay < 1.0f))
    fail(errc::invalid_argument, module, "decay must be in (0, 1)");
}

struct QuantizeResult {
  std::uint32_t index = 0;
  std::vector<float> vector; // copy of the chosen code
  double distance = 0.0;     // achieved L2 distance
};

namespace detail {

inline std::pair<std::uint32_t, double> nearest_code(std::span<const float> z,
                                                     const Matrix& codes) {
  std::uint32_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < codes.rows; ++k) {
    double sq = 0.0;
    const float* e = codes.data.data() + k * codes.cols;
    for (std::size_t j = 0; j < codes.cols; ++j) {
      const double diff = static_cast<double>(z[j]) - e[j];
      sq += diff * diff;
    }
    if (sq < best_sq) { // strict: ties keep the lowest index
      best_sq = sq;
      best = static_cast<std::uint32_t>(k);
    }
  }
  return {best, std::sqrt(best_sq)};
}

} // namespace detail

inline QuantizeResult quantize(std::span<const float> z, const Codebook& cb) {
  static const std::string module = "vq";
  if (cb.k() == 0) fail(errc::invalid_argument, module, "empty codebook");
  if (z.size() != cb.h())
    fail(errc::dimension_mismatch, module,
         "vector length " + std::to_string(z.size()) + " != codebook H=" +
             std::to_string(cb.h()));
  auto [index, dist] = detail::nearest_code(z, cb.vectors);
  QuantizeResult r;
  r.index = index;
  r.vector.assign(cb.vectors.row(index).begin(), cb.vectors.row(index).end());
  r.distance = dist;
  return r;
}

inline std::pair<std::vector<std::uint32_t>, Matrix> quantize_batch(
    const Matrix& z, const Codebook& cb) {
  static const std::string module = "vq";
  if (cb.k() == 0) fail(errc::invalid_argument, module, "empty codebook");
  if (z.rows > 0 && z.cols != cb.h())
    fail(errc::dimension_mismatch, module, "batch width != codebook H");
  std::vector<std::uint32_t> indices(z.rows);
  Matrix quantized(z.rows, cb.h());
  for (std::size_t n = 0; n < z.rows; ++n) {
    auto [index, dist] = detail::nearest_code(z.row(n), cb.vectors);
    (void)dist;
    indices[n] = index;
    std::copy(cb.vectors.row(index).begin(), cb.vectors.row(index).end(),
              quantized.row(n).begin());
  }
  return {std::move(indices), std::move(quantized)};
}

// Sum over rows of the L2 distance to the assigned code (codes held constant;
// reporting only).
inline double commitment_loss(const Matrix& z, const Codebook& cb) {
  static const std::string module = "vq";
  if (z.rows == 0) fail(errc::invalid_argument, module, "empty batch");
  if (z.cols != cb.h())
    fail(errc::dimension_mismatch, module, "batch width != codebook H");
  double total = 0.0;
  for (std::size_t n = 0; n < z.rows; ++n)
    total += detail::nearest_code(z.row(n), cb.vectors).second;
  return total;
}

struct StepStats {
  double loss_before = 0.0;            // commitment loss against entry codes
  std::vector<bool> assigned;          // per code: won at least one vector
  std::vector<std::uint32_t> awakened; // codes reset from this batch
};

// One EMA update from a batch: assign, fold counts/sums into the EMAs, set
// e_k = ema_sum_k / max(ema_count_k, eps), then awaken low-count codes from
// the batch. threshold < 0 selects the default 0.01 * batch_rows / K.
inline StepStats ema_update(Codebook& cb, const Matrix& batch, std::mt19937_64& rng,
                            double threshold = -1.0) {
  static const std::string module = "vq";
  constexpr double eps = 1e-9;
  validate(cb);
  if (batch.rows == 0) fail(errc::invalid_argument, module, "empty batch");
  if (batch.cols != cb.h())
    fail(errc::dimension_mismatch, module, "batch width != codebook H");
  if (cb.ema_counts.size() != cb.k()) cb.ema_counts.assign(cb.k(), 0.0);
  if (cb.ema_sums.size() != cb.k() * cb.h()) cb.ema_sums.assign(cb.k() * cb.h(), 0.0);

  const std::size_t k_count = cb.k(), h = cb.h();
  StepStats stats;
  stats.assigned.assign(k_count, false);

  std::vector<double> counts(k_count, 0.0);
  std::vector<double> sums(k_count * h, 0.0);
  for (std::size_t n = 0; n < batch.rows; ++n) {
    auto [index, dist] = detail::nearest_code(batch.row(n), cb.vectors);
    stats.loss_before += dist;
    stats.assigned[index] = true;
    counts[index] += 1.0;
    for (std::size_t j = 0; j < h; ++j) sums[index * h + j] += batch.at(n, j);
  }

  const double g = cb.decay;
  for (std::size_t k = 0; k < k_count; ++k) {
    cb.ema_counts[k] = g * cb.ema_counts[k] + (1.0 - g) * counts[k];
    for (std::size_t j = 0; j < h; ++j)
      cb.ema_sums[k * h + j] = g * cb.ema_sums[k * h + j] + (1.0 - g) * sums[k * h + j];
    const double denom = std::max(cb.ema_counts[k], eps);
    for (std::size_t j = 0; j < h; ++j)
      cb.vectors.at(k, j) = static_cast<float>(cb.ema_sums[k * h + j] / denom);
  }

  const double th = threshold >= 0.0
                        ? threshold
                        : 0.01 * static_cast<double>(batch.rows) / k_count;
  const double reset_count = std::max(1.0, th);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (cb.ema_counts[k] < th) {
      const std::size_t pick = rng() % batch.rows;
      for (std::size_t j = 0; j < h; ++j) {
        const float v = batch.at(pick, j);
        cb.vectors.at(k, j) = v;
        cb.ema_sums[k * h + j] = reset_count * v;
      }
      cb.ema_counts[k] = reset_count;
      stats.awakened.push_back(static_cast<std::uint32_t>(k));
    }
  }
  cb.rehash();
  return stats;
}

struct TrainConfig {
  double decay = 0.99;
  std::uint32_t epochs = 20;
  std::uint64_t seed = 0;
  std::optional<double> awaken_threshold; // default 0.01 * batch_rows / K
};

struct TrainReport {
  std::uint32_t epochs_run = 0;
  std::vector<double> commitment_loss_per_epoch; // measured before each update
  double codebook_usage = 0.0; // fraction assigned at least once, final epoch
  std::uint64_t awakenings = 0;
};

// Initializes K codes by sampling K distinct training vectors (seeded), then
// runs EMA updates over the batches for the requested number of epochs.
inline std::pair<Codebook, TrainReport> train_codebook(
    const std::vector<Matrix>& batches, std::uint32_t k_count, std::uint32_t h,
    const TrainConfig& cfg) {
  static const std::string module = "vq";
  if (k_count < 1 || h < 1)
    fail(errc::invalid_argument, module, "K and H must be >= 1");
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0))
    fail(errc::invalid_argument, module, "decay must be in (0, 1)");
  if (cfg.epochs < 1) fail(errc::invalid_argument, module, "epochs must be >= 1");

  std::size_t total = 0;
  for (const Matrix& b : batches) {
    if (b.rows == 0) continue;
    if (b.cols != h) fail(errc::dimension_mismatch, module, "batch width != H");
    if (!b.all_finite())
      fail(errc::invalid_argument, module, "training data contains non-finite values");
    total += b.rows;
  }
  if (total == 0) fail(errc::invalid_argument, module, "empty training stream");

  // Distinct vectors in first-occurrence order.
  std::vector<std::vector<float>> distinct;
  {
    std::vector<std::vector<float>> seen;
    for (const Matrix& b : batches)
      for (std::size_t n = 0; n < b.rows; ++n)
        seen.emplace_back(b.row(n).begin(), b.row(n).end());
    std::vector<std::vector<float>> sorted = seen;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (sorted.size() < k_count)
      fail(errc::insufficient_data, module,
           "fewer distinct training vectors (" + std::to_string(sorted.size()) +
               ") than K=" + std::to_string(k_count));
    distinct = std::move(sorted);
  }

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(distinct.begin(), distinct.end(), rng);

  Codebook cb;
  cb.vectors = Matrix(k_count, h);
  for (std::uint32_t k = 0; k < k_count; ++k)
    std::copy(distinct[k].begin(), distinct[k].end(), cb.vectors.row(k).begin());
  cb.decay = static_cast<float>(cfg.decay);
  cb.ema_counts.assign(k_count, 0.0);
  cb.ema_sums.assign(static_cast<std::size_t>(k_count) * h, 0.0);

  TrainReport report;
  std::vector<bool> last_epoch_assigned(k_count, false);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::fill(last_epoch_assigned.begin(), last_epoch_assigned.end(), false);
    for (const Matrix& b : batches) {
      if (b.rows == 0) continue;
      const double th = cfg.awaken_threshold
                            ? *cfg.awaken_threshold
                            : 0.01 * static_cast<double>(b.rows) / k_count;
      cb.awaken_threshold = th;
      StepStats stats = ema_update(cb, b, rng, th);
      epoch_loss += stats.loss_before;
      report.awakenings += stats.awakened.size();
      for (std::size_t k = 0; k < k_count; ++k)
        if (stats.assigned[k]) last_epoch_assigned[k] = true;
    }
    report.commitment_loss_per_epoch.push_back(epoch_loss);
  }
  report.epochs_run = cfg.epochs;
  report.codebook_usage =
      static_cast<double>(std::count(last_epoch_assigned.begin(),
                                     last_epoch_assigned.end(), true)) /
      k_count;
  cb.rehash();
  return {std::move(cb), std::move(report)};
}

// --- codebook file ----------------------------------------------------------
//
// Layout (magic "VSCB"): version u16, K u32, H u32, decay f32, K*H
// little-endian f32 code vectors, then the 32-byte content hash.

inline constexpr std::uint16_t kCodebookFormatVersion = 1;

inline void write_codebook(const std::string& path, const Codebook& cb) {
  static const std::string module = "vq";
  validate(cb);
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, module, "cannot write codebook file: " + path);
  detail::write_bytes(os, "VSCB", 4);
  detail::write_u16le(os, kCodebookFormatVersion);
  detail::write_u32le(os, static_cast<std::uint32_t>(cb.k()));
  detail::write_u32le(os, static_cast<std::uint32_t>(cb.h()));
  detail::write_f32le(os, cb.decay);
  for (float v : cb.vectors.data) detail::write_f32le(os, v);
  detail::write_bytes(os, cb.content_hash.data(), cb.content_hash.size());
  if (!os) fail(errc::io, module, "write failed: " + path);
}

// EMA statistics are not persisted; a loaded codebook is a frozen quantizer.
inline Codebook read_codebook(const std::string& path) {
  static const std::string module = "vq";
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, module, "cannot open codebook file: " + path);
  detail::expect_magic(is, "VSCB", module);
  const std::uint16_t version = detail::read_u16le(is, module);
  if (version != kCodebookFormatVersion)
    fail(errc::bad_format, module, "unsupported VSCB version");
  const std::uint32_t k = detail::read_u32le(is, module);
  const std::uint32_t h = detail::read_u32le(is, module);
  if (k == 0 || h == 0) fail(errc::bad_format, module, "VSCB header: K and H must be >= 1");
  Codebook cb;
  cb.decay = detail::read_f32le(is, module);
  cb.vectors = Matrix(k, h);
  for (float& v : cb.vectors.data) v = detail::read_f32le(is, module);
  Digest stored;
  detail::read_bytes(is, stored.data(), stored.size(), module);
  cb.ema_counts.assign(k, 0.0);
  cb.ema_sums.assign(static_cast<std::size_t>(k) * h, 0.0);
  cb.rehash();
  if (cb.content_hash != stored)
    fail(errc::hash_mismatch, module, "codebook hash mismatch (corrupted file)");
  validate(cb);
  return cb;
}

} // namespace varstok
