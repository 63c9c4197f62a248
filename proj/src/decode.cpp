#include "lmeval/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmeval/error.hpp"
#include "lmeval/lm.hpp"

namespace lmeval::decode {

namespace {

std::vector<double> renormalize_kept(std::span<const double> dist, std::span<const TokenId> kept) {
  double mass = 0.0;
  for (TokenId id : kept) mass += dist[id];
  std::vector<double> out(dist.size(), 0.0);
  if (mass <= 0.0) return out;
  for (TokenId id : kept) out[id] = dist[id] / mass;
  return out;
}

std::vector<double> softmax_inplace(std::vector<double> lp) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : lp) hi = std::max(hi, v);
  if (!std::isfinite(hi)) throw Error(Errc::InvalidArgument, "distribution has no finite log-probability");
  double sum = 0.0;
  for (double& v : lp) {
    v = std::exp(v - hi);
    sum += v;
  }
  for (double& v : lp) v /= sum;
  return lp;
}

}  // namespace

std::vector<TokenId> rank_tokens(std::span<const double> dist) {
  std::vector<TokenId> order(dist.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return dist[a] > dist[b]; });
  return order;
}

std::vector<double> truncate_renormalize(std::span<const double> dist, const Transform& mode) {
  if (dist.empty()) throw Error(Errc::InvalidArgument, "empty distribution");
  if (const auto* topk = std::get_if<TopK>(&mode)) {
    if (topk->k < 1) throw Error(Errc::ConfigError, "top-k requires k >= 1");
    if (topk->k >= dist.size()) return {dist.begin(), dist.end()};
    auto ranked = rank_tokens(dist);
    ranked.resize(topk->k);
    return renormalize_kept(dist, ranked);
  }
  if (const auto* topp = std::get_if<TopP>(&mode)) {
    if (!(topp->p > 0.0 && topp->p <= 1.0)) throw Error(Errc::ConfigError, "top-p requires 0 < p <= 1");
    if (topp->p >= 1.0) return {dist.begin(), dist.end()};
    auto ranked = rank_tokens(dist);
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < ranked.size()) {
      cum += dist[ranked[keep++]];
      if (cum >= topp->p) break;
    }
    ranked.resize(keep);
    return renormalize_kept(dist, ranked);
  }
  const double t = std::get<Temperature>(mode).t;
  if (!(t > 0.0)) throw Error(Errc::ConfigError, "temperature must be > 0");
  if (t == 1.0) return {dist.begin(), dist.end()};
  std::vector<double> lp(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) lp[i] = std::log(dist[i]) / t;
  return softmax_inplace(std::move(lp));
}

std::vector<double> penalize(std::span<const double> dist, std::span<const TokenId> generated,
                             double theta) {
  if (!(theta >= 1.0)) throw Error(Errc::ConfigError, "penalty theta must be >= 1");
  if (theta == 1.0 || generated.empty()) return {dist.begin(), dist.end()};
  std::vector<bool> seen(dist.size(), false);
  for (TokenId id : generated) {
    if (id >= dist.size()) throw Error(Errc::InvalidArgument, "generated token id out of range");
    seen[id] = true;
  }
  std::vector<double> lp(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double l = std::log(dist[i]);
    lp[i] = seen[i] ? theta * l : l;
  }
  return softmax_inplace(std::move(lp));
}

TokenId sample_at(std::span<const double> dist, double u) {
  if (dist.empty()) throw Error(Errc::InvalidArgument, "empty distribution");
  const auto ranked = rank_tokens(dist);
  double total = 0.0;
  for (double p : dist) total += p;
  const double target = u * total;
  double cum = 0.0;
  TokenId last_positive = ranked.front();
  for (TokenId id : ranked) {
    if (dist[id] <= 0.0) break;
    last_positive = id;
    cum += dist[id];
    if (cum > target) return id;
  }
  return last_positive;
}

TokenId sample(std::span<const double> dist, SplitMix64& rng) { return sample_at(dist, rng.uniform()); }

TokenId argmax(std::span<const double> dist) {
  if (dist.empty()) throw Error(Errc::InvalidArgument, "empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "beam") return Strategy::Beam;
  if (name == "temp" || name == "temperature") return Strategy::Temperature;
  if (name == "topk") return Strategy::TopK;
  if (name == "topp") return Strategy::TopP;
  if (name == "penalized") return Strategy::Penalized;
  throw Error(Errc::ConfigError, "unknown decoding strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Beam: return "beam";
    case Strategy::Temperature: return "temp";
    case Strategy::TopK: return "topk";
    case Strategy::TopP: return "topp";
    case Strategy::Penalized: return "penalized";
  }
  return "greedy";
}

namespace {

int integral_param(double v, const char* what) {
  if (v != std::floor(v) || v < 0 || v > 1e9) {
    throw Error(Errc::ConfigError, std::string(what) + " must be a non-negative integer");
  }
  return static_cast<int>(v);
}

}  // namespace

DecoderConfig DecoderConfig::make(Strategy strategy, std::optional<double> param,
                                  std::uint64_t seed, std::size_t max_len) {
  DecoderConfig cfg;
  cfg.strategy = strategy;
  cfg.seed = seed;
  cfg.max_len = max_len;
  if (strategy == Strategy::Greedy) return cfg;
  if (!param) {
    throw Error(Errc::ConfigError, "strategy '" + std::string(strategy_name(strategy)) + "' needs a parameter");
  }
  switch (strategy) {
    case Strategy::Beam: cfg.b = integral_param(*param, "beam width"); break;
    case Strategy::Temperature: cfg.t = *param; break;
    case Strategy::TopK: cfg.k = integral_param(*param, "k"); break;
    case Strategy::TopP: cfg.p = *param; break;
    case Strategy::Penalized: cfg.theta = *param; break;
    case Strategy::Greedy: break;
  }
  return cfg;
}

std::optional<double> DecoderConfig::param() const {
  switch (strategy) {
    case Strategy::Greedy: return std::nullopt;
    case Strategy::Beam: return b ? std::optional<double>(*b) : std::nullopt;
    case Strategy::Temperature: return t;
    case Strategy::TopK: return k ? std::optional<double>(*k) : std::nullopt;
    case Strategy::TopP: return p;
    case Strategy::Penalized: return theta;
  }
  return std::nullopt;
}

void DecoderConfig::validate(std::size_t vocab_size) const {
  const std::string name(strategy_name(strategy));
  auto fail = [&](const std::string& why) { throw Error(Errc::ConfigError, name + ": " + why); };
  const bool allow_t = strategy == Strategy::Temperature || strategy == Strategy::Penalized;
  if (b && strategy != Strategy::Beam) fail("parameter b does not apply");
  if (t && !allow_t) fail("parameter t does not apply");
  if (k && strategy != Strategy::TopK) fail("parameter k does not apply");
  if (p && strategy != Strategy::TopP) fail("parameter p does not apply");
  if (theta && strategy != Strategy::Penalized) fail("parameter theta does not apply");
  if (max_len < 1) fail("max_len must be >= 1");
  switch (strategy) {
    case Strategy::Greedy: break;
    case Strategy::Beam:
      if (!b || *b < 1) fail("requires b >= 1");
      break;
    case Strategy::Temperature:
      if (!t || !(*t > 0.0)) fail("requires t > 0");
      break;
    case Strategy::TopK:
      if (!k || *k < 1 || static_cast<std::size_t>(*k) > vocab_size) fail("requires 1 <= k <= |V|");
      break;
    case Strategy::TopP:
      if (!p || !(*p > 0.0 && *p <= 1.0)) fail("requires 0 < p <= 1");
      break;
    case Strategy::Penalized:
      if (!theta || !(*theta >= 1.0)) fail("requires theta >= 1");
      if (t && !(*t > 0.0)) fail("optional t must be > 0");
      break;
  }
}

namespace {

struct Hypothesis {
  std::vector<TokenId> tokens;
  double score = 0.0;
};

std::vector<TokenId> beam_search(const lm::LanguageModel& model, TokenSpan prefix,
                                 std::size_t width, std::size_t max_len) {
  std::vector<Hypothesis> beam{Hypothesis{}};
  std::vector<TokenId> history;
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double score;
  };
  std::vector<Candidate> candidates;
  for (std::size_t step = 0; step < max_len; ++step) {
    candidates.clear();
    for (std::size_t h = 0; h < beam.size(); ++h) {
      history.assign(prefix.begin(), prefix.end());
      history.insert(history.end(), beam[h].tokens.begin(), beam[h].tokens.end());
      const auto dist = model.next_dist(history);
      for (std::size_t w = 0; w < dist.size(); ++w) {
        candidates.push_back({h, static_cast<TokenId>(w), beam[h].score + std::log(dist[w])});
      }
    }
    // Higher score first; equal scores by lexicographic token sequence.
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& ta = beam[a.parent].tokens;
      const auto& tb = beam[b.parent].tokens;
      if (ta != tb) return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
      return a.token < b.token;
    };
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis hyp{beam[candidates[i].parent].tokens, candidates[i].score};
      hyp.tokens.push_back(candidates[i].token);
      next.push_back(std::move(hyp));
    }
    beam = std::move(next);
  }
  return beam.front().tokens;
}

}  // namespace

std::vector<TokenId> generate(const lm::LanguageModel& model, TokenSpan prefix,
                              const DecoderConfig& cfg) {
  if (prefix.empty()) throw Error(Errc::InvalidArgument, "generation prefix is empty");
  cfg.validate(model.vocab_size());
  check_ids(prefix, model.vocab_size());

  if (cfg.strategy == Strategy::Beam) {
    return beam_search(model, prefix, static_cast<std::size_t>(*cfg.b), cfg.max_len);
  }

  SplitMix64 rng(cfg.seed);
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  std::vector<TokenId> out;
  out.reserve(cfg.max_len);
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    const auto dist = model.next_dist(history);
    TokenId next = 0;
    switch (cfg.strategy) {
      case Strategy::Greedy:
        next = argmax(dist);
        break;
      case Strategy::Temperature:
        next = sample(truncate_renormalize(dist, Temperature{*cfg.t}), rng);
        break;
      case Strategy::TopK:
        next = sample(truncate_renormalize(dist, TopK{static_cast<std::size_t>(*cfg.k)}), rng);
        break;
      case Strategy::TopP:
        next = sample(truncate_renormalize(dist, TopP{*cfg.p}), rng);
        break;
      case Strategy::Penalized: {
        auto penalized = penalize(dist, out, *cfg.theta);
        next = cfg.t ? sample(truncate_renormalize(penalized, Temperature{*cfg.t}), rng)
                     : argmax(penalized);
        break;
      }
      case Strategy::Beam:
        break;
    }
    out.push_back(next);
    history.push_back(next);
  }
  return out;
}

}  // namespace lmeval::decode
