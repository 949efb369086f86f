#pragma once

// Toy autoregressive model over extended token IDs: an add-alpha smoothed
// n-gram. Its purpose is to demonstrate that duration-coded tokens feed a
// standard next-token predictor directly -- one flat vocabulary, no duration
// predictor. Scoring uses the smoothed distribution over IDs plus the end
// marker; generation samples the raw empirical conditionals restricted to
// real IDs (unseen contexts fall back to a uniform draw), so a model whose
// contexts each have a single continuation generates identically under every
// seed.

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "varstok/duration_coding.hpp"
#include "varstok/error.hpp"
#include "varstok/token_stream.hpp"

namespace varstok {

struct NGramModel {
  std::uint32_t order = 3;
  double alpha = 0.1;
  CodingSpace space;
  // context (length order-1, may contain BOS) -> next symbol -> count.
  std::map<std::vector<std::uint32_t>, std::map<std::uint32_t, std::uint64_t>> counts;

  std::uint32_t bos() const { return static_cast<std::uint32_t>(space.vocab_size()); }
  std::uint32_t eos() const { return bos() + 1; }
  // Symbols a context can emit: every extended ID plus the end marker.
  std::uint64_t alphabet_size() const { return space.vocab_size() + 1; }
};

inline void validate(const NGramModel& model) {
  static const std::string module = "lm";
  validate(model.space);
  if (model.order < 1) fail(errc::invalid_argument, module, "order must be >= 1");
  if (!(model.alpha > 0.0)) fail(errc::invalid_argument, module, "alpha must be > 0");
  if (model.space.vocab_size() + 2 > (std::uint64_t{1} << 32))
    fail(errc::invalid_argument, module, "vocabulary too large for 32-bit symbols");
}

inline NGramModel fit_ngram(std::span<const TokenStream> streams,
                            std::uint32_t order, double alpha) {
  static const std::string module = "lm";
  if (streams.empty()) fail(errc::invalid_argument, module, "empty corpus");
  NGramModel model;
  model.order = order;
  model.alpha = alpha;
  model.space = streams.front().space;
  validate(model);
  for (const TokenStream& ts : streams) {
    if (!(ts.space == model.space))
      fail(errc::invalid_argument, module, "streams use different coding spaces");
    std::deque<std::uint32_t> ctx(order - 1, model.bos());
    auto push = [&](std::uint32_t symbol) {
      model.counts[{ctx.begin(), ctx.end()}][symbol] += 1;
      if (order > 1) {
        ctx.push_back(symbol);
        ctx.pop_front();
      }
    };
    for (ExtendedToken id : ts.tokens) {
      decode_id(id, model.space); // range check
      push(id);
    }
    push(model.eos());
  }
  return model;
}

namespace detail {

inline double smoothed_prob(const NGramModel& model,
                            const std::vector<std::uint32_t>& ctx,
                            std::uint32_t symbol) {
  std::uint64_t count = 0, total = 0;
  if (auto it = model.counts.find(ctx); it != model.counts.end()) {
    for (const auto& [sym, c] : it->second) {
      total += c;
      if (sym == symbol) count = c;
    }
  }
  const double a = model.alpha;
  return (static_cast<double>(count) + a) /
         (static_cast<double>(total) + a * static_cast<double>(model.alphabet_size()));
}

} // namespace detail

// exp of the mean negative log-probability over the stream's tokens plus the
// end marker.
inline double perplexity(const NGramModel& model, const TokenStream& stream) {
  static const std::string module = "lm";
  validate(model);
  if (!(stream.space == model.space))
    fail(errc::invalid_argument, module, "stream coding space != model vocabulary");
  std::deque<std::uint32_t> ctx(model.order - 1, model.bos());
  double nll = 0.0;
  std::uint64_t events = 0;
  auto score = [&](std::uint32_t symbol) {
    nll -= std::log(detail::smoothed_prob(model, {ctx.begin(), ctx.end()}, symbol));
    ++events;
    if (model.order > 1) {
      ctx.push_back(symbol);
      ctx.pop_front();
    }
  };
  for (ExtendedToken id : stream.tokens) {
    decode_id(id, model.space);
    score(id);
  }
  score(model.eos());
  return std::exp(nll / static_cast<double>(events));
}

// Seeded ancestral sampling of `length` extended IDs continuing `prompt`.
inline std::vector<std::uint32_t> generate(const NGramModel& model,
                                           std::span<const std::uint32_t> prompt,
                                           std::size_t length, std::uint64_t seed) {
  static const std::string module = "lm";
  validate(model);
  for (std::uint32_t id : prompt)
    if (static_cast<std::uint64_t>(id) >= model.space.vocab_size())
      fail(errc::invalid_argument, module,
           "prompt ID " + std::to_string(id) + " outside the vocabulary");

  std::deque<std::uint32_t> ctx(model.order - 1, model.bos());
  for (std::uint32_t id : prompt) {
    if (model.order > 1) {
      ctx.push_back(id);
      ctx.pop_front();
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> out;
  out.reserve(length);
  const std::uint64_t vocab = model.space.vocab_size();
  for (std::size_t i = 0; i < length; ++i) {
    std::uint32_t symbol = 0;
    std::uint64_t total = 0;
    const auto it = model.counts.find({ctx.begin(), ctx.end()});
    if (it != model.counts.end())
      for (const auto& [sym, c] : it->second)
        if (sym != model.eos()) total += c;
    if (total > 0) {
      std::uint64_t target = rng() % total;
      for (const auto& [sym, c] : it->second) {
        if (sym == model.eos()) continue;
        if (target < c) {
          symbol = sym;
          break;
        }
        target -= c;
      }
    } else {
      symbol = static_cast<std::uint32_t>(rng() % vocab);
    }
    out.push_back(symbol);
    if (model.order > 1) {
      ctx.push_back(symbol);
      ctx.pop_front();
    }
  }
  return out;
}

// --- model file -------------------------------------------------------------
//
// Sorted text table, one line per (context, next, count); diffable. BOS/EOS
// appear as their numeric symbol values (vocab and vocab + 1).

inline void write_model(const NGramModel& model, const std::string& path) {
  static const std::string module = "lm";
  validate(model);
  std::ofstream os(path);
  if (!os) fail(errc::io, module, "cannot write model file: " + path);
  os << "ngram 1\n";
  os << "order " << model.order << '\n';
  std::ostringstream a;
  a.precision(17);
  a << model.alpha;
  os << "alpha " << a.str() << '\n';
  os << "space " << model.space.codebook_size << ' ' << model.space.s_max << '\n';
  for (const auto& [ctx, nexts] : model.counts)
    for (const auto& [sym, c] : nexts) {
      for (std::uint32_t v : ctx) os << v << ' ';
      os << "-> " << sym << ' ' << c << '\n';
    }
  if (!os) fail(errc::io, module, "write failed: " + path);
}

inline NGramModel read_model(const std::string& path) {
  static const std::string module = "lm";
  std::ifstream is(path);
  if (!is) fail(errc::io, module, "cannot open model file: " + path);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "ngram" || version != 1)
    fail(errc::bad_format, module, "bad model header");
  NGramModel model;
  if (!(is >> tag >> model.order) || tag != "order")
    fail(errc::bad_format, module, "bad order line");
  if (!(is >> tag >> model.alpha) || tag != "alpha")
    fail(errc::bad_format, module, "bad alpha line");
  if (!(is >> tag >> model.space.codebook_size >> model.space.s_max) || tag != "space")
    fail(errc::bad_format, module, "bad space line");
  validate(model);
  std::string line;
  std::getline(is, line); // finish header line
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::uint32_t> ctx;
    std::string tok;
    while (ls >> tok && tok != "->") ctx.push_back(std::stoul(tok));
    std::uint32_t sym = 0;
    std::uint64_t count = 0;
    if (tok != "->" || !(ls >> sym >> count))
      fail(errc::bad_format, module, "bad count line: " + line);
    if (ctx.size() + 1 != model.order)
      fail(errc::bad_format, module, "context length does not match order");
    model.counts[ctx][sym] = count;
  }
  return model;
}

} // namespace varstok
