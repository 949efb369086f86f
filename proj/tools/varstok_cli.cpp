// varstok command-line tool: train-codebook, tokenize, detokenize, stats,
// boundaries, sweep. Every subcommand is deterministic given its flags and
// seed; error exit codes are per category (see README).

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "varstok/varstok.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FrontendFlags {
  varstok::FrontendConfig cfg;
  std::uint32_t sample_rate = 24000; // accepted input rate for WAV files
  std::uint32_t base_rate_num = 0;   // frame rate for CSV embeddings
  std::uint32_t base_rate_den = 1;
  std::uint32_t embed_h = 0; // expected H for embedding files (0 = any)

  void attach(CLI::App* cmd) {
    cmd->add_option("--fft", cfg.fft_size, "FFT size (power of two)")
        ->capture_default_str();
    cmd->add_option("--hop", cfg.hop_size, "hop size in samples")
        ->capture_default_str();
    cmd->add_option("--mel-bands", cfg.mel_bands, "mel band count (H for audio)")
        ->capture_default_str();
    cmd->add_option("--log-floor", cfg.log_floor, "log-mel floor")
        ->capture_default_str();
    cmd->add_option("--window", cfg.window, "analysis window: hann|rect")
        ->capture_default_str();
    cmd->add_option("--sample-rate", sample_rate, "required WAV sample rate")
        ->capture_default_str();
    cmd->add_option("--base-rate", base_rate_num,
                    "base frame rate numerator for CSV embeddings");
    cmd->add_option("--base-rate-den", base_rate_den,
                    "base frame rate denominator for CSV embeddings")
        ->capture_default_str();
    cmd->add_option("--embed-h", embed_h, "expected H of embedding files (0 = any)");
  }

  varstok::FrameMatrix load(const std::string& path) const {
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".wav" || ext == ".WAV") {
      varstok::Waveform w = varstok::load_audio(path);
      if (w.sample_rate != sample_rate)
        varstok::fail(varstok::errc::invalid_argument, "frontend",
                      path + ": sample rate " + std::to_string(w.sample_rate) +
                          " != configured " + std::to_string(sample_rate) +
                          " (resampling is out of scope)");
      return varstok::compute_frames(w, cfg);
    }
    std::optional<varstok::FrameRate> rate;
    if (base_rate_num != 0)
      rate = varstok::FrameRate{base_rate_num, base_rate_den};
    return varstok::load_embeddings(path, embed_h, rate);
  }
};

struct ClusterFlags {
  varstok::ClusterParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tau", params.tau, "similarity threshold in (0,1)")
        ->capture_default_str();
    cmd->add_option("--beta", params.beta, "peak-score penalty >= 0")
        ->capture_default_str();
    cmd->add_option("--m", params.m, "neighbor count for local density")
        ->capture_default_str();
    cmd->add_option("--smax", params.s_max, "maximum cluster span in frames")
        ->capture_default_str();
  }
};

std::string stats_line(const std::string& name, const varstok::TokenStream& ts) {
  const varstok::TokenStream one[] = {ts};
  std::ostringstream os;
  os.precision(6);
  os << name << ": tokens=" << ts.tokens.size() << " frames=" << ts.total_frames()
     << " seconds=" << ts.source_duration_sec
     << " rate=" << varstok::frame_rate(one)
     << " base=" << ts.base_frame_rate.hz() << " Hz";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) varstok::fail(varstok::errc::io, "cli", "cannot write " + path);
  os << text;
}

int run_train(const std::vector<std::string>& inputs, const FrontendFlags& fe,
              const ClusterFlags& cl, bool pool_first, std::uint32_t k,
              varstok::TrainConfig tc, const std::string& out, bool as_json) {
  std::vector<varstok::Matrix> batches;
  std::uint32_t h = 0;
  for (const std::string& in : inputs) {
    varstok::FrameMatrix x = fe.load(in);
    h = static_cast<std::uint32_t>(x.h());
    if (pool_first) {
      auto seg = varstok::segment(x, cl.params);
      batches.push_back(varstok::pool(x, seg).z);
    } else {
      batches.push_back(std::move(x.frames));
    }
  }
  auto [cb, report] = varstok::train_codebook(batches, k, h, tc);
  varstok::write_codebook(out, cb);

  if (as_json) {
    json j;
    j["epochs_run"] = report.epochs_run;
    j["commitment_loss_per_epoch"] = report.commitment_loss_per_epoch;
    j["codebook_usage"] = report.codebook_usage;
    j["awakenings"] = report.awakenings;
    j["codebook"] = out;
    j["content_hash"] = varstok::hex(cb.content_hash);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "codebook " << out << " K=" << cb.k() << " H=" << cb.h()
              << " hash=" << varstok::hex(cb.content_hash).substr(0, 12) << "...\n";
    std::cout << "epochs_run        " << report.epochs_run << "\n";
    std::cout << "codebook_usage    " << report.codebook_usage << "\n";
    std::cout << "awakenings        " << report.awakenings << "\n";
    std::cout << "final_commit_loss "
              << report.commitment_loss_per_epoch.back() << "\n";
  }
  return 0;
}

int run_tokenize(const std::vector<std::string>& inputs, const FrontendFlags& fe,
                 const ClusterFlags& cl, const std::string& codebook_path,
                 const std::string& out, unsigned jobs, bool emit_json) {
  const varstok::Codebook cb = varstok::read_codebook(codebook_path);
  const bool multi = inputs.size() > 1;
  if (multi && !out.empty() && !fs::is_directory(out))
    varstok::fail(varstok::errc::invalid_argument, "cli",
                  "--out must be a directory when tokenizing multiple inputs");

  struct Result {
    std::string line;
    std::optional<varstok::error> err;
  };
  std::vector<Result> results(inputs.size());

  auto out_path = [&](const std::string& in) {
    if (!multi && !out.empty()) return fs::path(out);
    fs::path base = fs::path(in).filename().replace_extension(".vstk");
    return out.empty() ? fs::path(in).parent_path() / base : fs::path(out) / base;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < inputs.size(); i = next.fetch_add(1)) {
      try {
        varstok::FrameMatrix x = fe.load(inputs[i]);
        varstok::TokenStream ts = varstok::tokenize(x, cb, cl.params);
        const fs::path dest = out_path(inputs[i]);
        varstok::write_stream(ts, dest.string());
        if (emit_json) {
          std::ofstream js(dest.string() + ".json");
          js << varstok::to_json(ts).dump(2) << "\n";
        }
        results[i].line = stats_line(inputs[i], ts) + " -> " + dest.string();
      } catch (const varstok::error& e) {
        results[i].err = e;
      }
    }
  };

  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(inputs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  int rc = 0;
  for (const Result& r : results) {
    if (r.err) {
      std::cerr << "error: " << r.err->what() << "\n";
      if (rc == 0) rc = static_cast<int>(r.err->code());
    } else {
      std::cout << r.line << "\n";
    }
  }
  return rc;
}

int run_detokenize(const std::string& stream_path, const std::string& codebook_path,
                   const std::string& out, bool csv) {
  const varstok::Codebook cb = varstok::read_codebook(codebook_path);
  const varstok::TokenStream ts = varstok::read_stream(stream_path);
  varstok::FrameMatrix x = varstok::expand(ts, cb);
  if (x.t() == 0)
    varstok::fail(varstok::errc::invalid_argument, "cli",
                  "stream is empty; nothing to write");
  if (csv)
    varstok::write_embeddings_csv(out, x);
  else
    varstok::write_embeddings_vseb(out, x);
  std::cout << stream_path << ": expanded to T=" << x.t() << " H=" << x.h()
            << " -> " << out << "\n";
  return 0;
}

int run_stats(const std::vector<std::string>& stream_paths, double rate_override,
              std::uint32_t k, std::uint32_t s_max, bool as_json,
              const std::string& csv_hist, const std::string& csv_rates) {
  varstok::RateReport report;
  std::vector<std::pair<std::string, varstok::TokenStream>> named;
  if (rate_override >= 0.0) {
    report.space = varstok::CodingSpace{k, s_max};
    report.frame_rate_hz = rate_override;
    report.bitrate_kbps = varstok::bitrate_kbps(rate_override, report.space);
    report.duration_histogram.assign(s_max, 0);
  } else {
    if (stream_paths.empty())
      varstok::fail(varstok::errc::invalid_argument, "metrics", "empty corpus");
    std::vector<varstok::TokenStream> streams;
    for (const std::string& p : stream_paths) {
      streams.push_back(varstok::read_stream(p));
      named.emplace_back(p, streams.back());
    }
    report = varstok::build_report(streams);
  }

  if (!csv_hist.empty()) write_text(csv_hist, varstok::histogram_csv(report));
  if (!csv_rates.empty()) write_text(csv_rates, varstok::per_utterance_csv(named));
  if (as_json)
    std::cout << varstok::to_json(report).dump(2) << "\n";
  else
    std::cout << varstok::to_table(report);
  return 0;
}

int run_boundaries(const std::string& stream_path, const std::string& format,
                   const std::string& out) {
  const varstok::TokenStream ts = varstok::read_stream(stream_path);
  const double num = ts.base_frame_rate.num, den = ts.base_frame_rate.den;
  std::uint64_t frame = 0;
  if (format == "csv") {
    std::ostringstream os;
    os.precision(10);
    os << "start_sec,duration_sec,k,d\n";
    for (varstok::ExtendedToken id : ts.tokens) {
      auto [kk, d] = varstok::decode_id(id, ts.space);
      os << frame * den / num << ',' << d * den / num << ',' << kk << ','
         << d << '\n';
      frame += d;
    }
    write_text(out, os.str());
  } else {
    json j = json::array();
    for (varstok::ExtendedToken id : ts.tokens) {
      auto [kk, d] = varstok::decode_id(id, ts.space);
      j.push_back({{"start_sec", frame * den / num},
                   {"duration_sec", d * den / num},
                   {"k", kk},
                   {"d", d}});
      frame += d;
    }
    write_text(out, j.dump(2) + "\n");
  }
  return 0;
}

int run_sweep(const std::vector<std::string>& inputs, const FrontendFlags& fe,
              std::vector<float> taus, std::vector<std::uint32_t> smaxs,
              std::uint32_t m, float beta, std::uint32_t k, const std::string& out) {
  if (inputs.empty())
    varstok::fail(varstok::errc::invalid_argument, "metrics", "empty corpus");
  std::vector<varstok::ScoredFrames> scored;
  std::vector<std::uint64_t> frames;
  std::vector<varstok::FrameRate> clocks;
  for (const std::string& in : inputs) {
    varstok::FrameMatrix x = fe.load(in);
    scored.push_back(varstok::score_frames(x, m));
    frames.push_back(x.t());
    clocks.push_back(x.base_frame_rate.reduced());
  }

  std::ostringstream os;
  os.precision(10);
  os << "tau,s_max,frame_rate_hz,bitrate_kbps\n";
  for (float tau : taus) {
    for (std::uint32_t s_max : smaxs) {
      varstok::ClusterParams p{m, tau, beta, s_max};
      std::uint64_t tokens = 0, total_frames = 0;
      double seconds = 0.0;
      bool uniform = true;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        tokens += varstok::segment(scored[i], p).clusters.size();
        total_frames += frames[i];
        seconds += static_cast<double>(frames[i]) * clocks[i].den / clocks[i].num;
        if (!(clocks[i] == clocks.front())) uniform = false;
      }
      const double rate =
          uniform ? static_cast<double>(tokens * clocks.front().num) /
                        static_cast<double>(total_frames * clocks.front().den)
                  : tokens / seconds;
      os << tau << ',' << s_max << ',' << rate << ','
         << varstok::bitrate_kbps(rate, {k, s_max}) << '\n';
    }
  }
  write_text(out, os.str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"varstok: variable-frame-rate speech tokenizer"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value config file (INI; flags override)");

  // train-codebook
  auto* train = app.add_subcommand("train-codebook", "train an EMA-VQ codebook");
  std::vector<std::string> train_inputs;
  FrontendFlags train_fe;
  ClusterFlags train_cl;
  std::uint32_t train_k = 4096;
  varstok::TrainConfig tc;
  double train_awaken = -1.0;
  bool train_pool = false, train_json = false;
  std::string train_out = "codebook.vscb";
  train->add_option("inputs", train_inputs, "WAV or embedding files")->required();
  train_fe.attach(train);
  train_cl.attach(train);
  train->add_option("-K,--codebook-size", train_k, "codebook size")
      ->capture_default_str();
  train->add_option("--epochs", tc.epochs, "training epochs")->capture_default_str();
  train->add_option("--seed", tc.seed, "RNG seed")->capture_default_str();
  train->add_option("--decay", tc.decay, "EMA decay in (0,1)")->capture_default_str();
  train->add_option("--awaken-threshold", train_awaken,
                    "EMA count below which codes are awakened (<0 = default)");
  train->add_flag("--pool", train_pool,
                  "train on pooled cluster embeddings instead of raw frames");
  train->add_flag("--json", train_json, "print the training report as JSON");
  train->add_option("-o,--out", train_out, "output codebook path")
      ->capture_default_str();

  // tokenize
  auto* tok = app.add_subcommand("tokenize", "audio/embeddings -> token stream");
  std::vector<std::string> tok_inputs;
  FrontendFlags tok_fe;
  ClusterFlags tok_cl;
  std::string tok_cb, tok_out;
  unsigned tok_jobs = 1;
  bool tok_json = false;
  tok->add_option("inputs", tok_inputs, "WAV or embedding files")->required();
  tok_fe.attach(tok);
  tok_cl.attach(tok);
  tok->add_option("--codebook", tok_cb, "codebook file")
      ->envname("VARSTOK_CODEBOOK")
      ->required();
  tok->add_option("-o,--out", tok_out, "output stream file (or directory)");
  tok->add_option("--jobs", tok_jobs, "parallel workers across input files")
      ->capture_default_str();
  tok->add_flag("--json", tok_json, "also write a .json mirror of each stream");

  // detokenize
  auto* detok = app.add_subcommand("detokenize", "token stream -> embedding file");
  std::string detok_stream, detok_cb, detok_out = "out.vseb";
  bool detok_csv = false;
  detok->add_option("stream", detok_stream, "input .vstk stream")->required();
  detok->add_option("--codebook", detok_cb, "codebook file")
      ->envname("VARSTOK_CODEBOOK")
      ->required();
  detok->add_option("-o,--out", detok_out, "output embedding file")
      ->capture_default_str();
  detok->add_flag("--csv", detok_csv, "write CSV instead of VSEB");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus rate/bitrate report");
  std::vector<std::string> stats_streams;
  double stats_rate = -1.0;
  std::uint32_t stats_k = 4096, stats_smax = 4;
  bool stats_json = false;
  std::string stats_csv_hist, stats_csv_rates;
  stats->add_option("streams", stats_streams, "token stream files");
  stats->add_option("--frame-rate", stats_rate,
                    "override: compute bitrate for this rate instead of streams");
  stats->add_option("-K,--codebook-size", stats_k, "K for --frame-rate override")
      ->capture_default_str();
  stats->add_option("--smax", stats_smax, "s_max for --frame-rate override")
      ->capture_default_str();
  stats->add_flag("--json", stats_json, "emit JSON instead of a table");
  stats->add_option("--csv-hist", stats_csv_hist, "write duration histogram CSV here");
  stats->add_option("--csv-rates", stats_csv_rates, "write per-utterance rate CSV here");

  // boundaries
  auto* bounds = app.add_subcommand("boundaries", "token boundary timestamps");
  std::string bounds_stream, bounds_format = "json", bounds_out;
  bounds->add_option("stream", bounds_stream, "input .vstk stream")->required();
  bounds->add_option("--format", bounds_format, "json|csv")->capture_default_str();
  bounds->add_option("-o,--out", bounds_out, "output path (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "tau/s_max grid -> rate CSV");
  std::vector<std::string> sweep_inputs;
  FrontendFlags sweep_fe;
  std::vector<float> sweep_taus{0.6f, 0.7f, 0.8f};
  std::vector<std::uint32_t> sweep_smaxs{1, 2, 4, 8};
  std::uint32_t sweep_m = 5, sweep_k = 4096;
  float sweep_beta = 0.2f;
  std::string sweep_out;
  sweep->add_option("inputs", sweep_inputs, "WAV or embedding files")->required();
  sweep_fe.attach(sweep);
  sweep->add_option("--taus", sweep_taus, "tau values")->delimiter(',');
  sweep->add_option("--smaxs", sweep_smaxs, "s_max values")->delimiter(',');
  sweep->add_option("--m", sweep_m, "neighbor count")->capture_default_str();
  sweep->add_option("--beta", sweep_beta, "peak-score penalty")->capture_default_str();
  sweep->add_option("-K,--codebook-size", sweep_k, "K for bitrate")
      ->capture_default_str();
  sweep->add_option("-o,--out", sweep_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (train_awaken >= 0.0) tc.awaken_threshold = train_awaken;
      return run_train(train_inputs, train_fe, train_cl, train_pool, train_k, tc,
                       train_out, train_json);
    }
    if (*tok)
      return run_tokenize(tok_inputs, tok_fe, tok_cl, tok_cb, tok_out, tok_jobs,
                          tok_json);
    if (*detok) return run_detokenize(detok_stream, detok_cb, detok_out, detok_csv);
    if (*stats)
      return run_stats(stats_streams, stats_rate, stats_k, stats_smax, stats_json,
                       stats_csv_hist, stats_csv_rates);
    if (*bounds) return run_boundaries(bounds_stream, bounds_format, bounds_out);
    if (*sweep)
      return run_sweep(sweep_inputs, sweep_fe, sweep_taus, sweep_smaxs, sweep_m,
                       sweep_beta, sweep_k, sweep_out);
  } catch (const varstok::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 10;
  }
  return 0;
}
