#include "lmeval/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmeval/error.hpp"

namespace lmeval::lm {

double LanguageModel::score(TokenSpan seq, TokenSpan context) const {
  std::vector<TokenId> history(context.begin(), context.end());
  history.reserve(context.size() + seq.size());
  double total = 0.0;
  for (TokenId token : seq) {
    const auto dist = next_dist(history);
    if (token >= dist.size()) throw Error(Errc::InvalidArgument, "token id out of range");
    total += std::log(dist[token]);
    history.push_back(token);
  }
  return total;
}

NGramLM NGramLM::fit(const std::vector<std::vector<TokenId>>& train, std::size_t vocab_size,
                     int order, double k_s) {
  if (order < 1) throw Error(Errc::BadOrder, "n-gram order must be >= 1");
  if (!(k_s >= 0.0)) throw Error(Errc::ConfigError, "smoothing constant must be >= 0");
  if (vocab_size < 1) throw Error(Errc::ConfigError, "vocabulary is empty");
  Table table;
  std::size_t n_tokens = 0;
  std::vector<TokenId> ctx;
  for (const auto& seq : train) {
    check_ids(seq, vocab_size);
    n_tokens += seq.size();
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(order - 1), t);
      for (std::size_t len = 0; len <= max_len; ++len) {
        ctx.assign(seq.begin() + static_cast<std::ptrdiff_t>(t - len),
                   seq.begin() + static_cast<std::ptrdiff_t>(t));
        auto& stats = table[ctx];
        ++stats.total;
        ++stats.next[seq[t]];
      }
    }
  }
  if (n_tokens == 0) throw Error(Errc::EmptyInput, "n-gram training set has no tokens");
  return NGramLM(vocab_size, order, k_s, std::move(table));
}

NGramLM::NGramLM(std::size_t vocab_size, int order, double k_s, Table table)
    : vocab_size_(vocab_size), order_(order), k_s_(k_s), table_(std::move(table)) {}

const NGramLM::ContextStats* NGramLM::lookup(TokenSpan history, std::size_t len) const {
  std::vector<TokenId> key(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
  auto it = table_.find(key);
  if (it == table_.end() || it->second.total == 0) return nullptr;
  return &it->second;
}

double NGramLM::prob(TokenSpan history, TokenId token) const {
  if (token >= vocab_size_) throw Error(Errc::InvalidArgument, "token id out of range");
  const double v = static_cast<double>(vocab_size_);
  std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), history.size());
  for (;;) {
    if (const ContextStats* stats = lookup(history, len)) {
      auto it = stats->next.find(token);
      const double c = it == stats->next.end() ? 0.0 : static_cast<double>(it->second);
      return (c + k_s_) / (static_cast<double>(stats->total) + k_s_ * v);
    }
    if (k_s_ > 0.0) return 1.0 / v;
    if (len == 0) return 0.0;
    --len;
  }
}

std::vector<double> NGramLM::next_dist(TokenSpan context) const {
  const double v = static_cast<double>(vocab_size_);
  std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), context.size());
  for (;;) {
    if (const ContextStats* stats = lookup(context, len)) {
      const double denom = static_cast<double>(stats->total) + k_s_ * v;
      std::vector<double> dist(vocab_size_, k_s_ / denom);
      for (const auto& [token, count] : stats->next) {
        dist[token] = (static_cast<double>(count) + k_s_) / denom;
      }
      return dist;
    }
    if (k_s_ > 0.0 || len == 0) return std::vector<double>(vocab_size_, 1.0 / v);
    --len;
  }
}

double NGramLM::score(TokenSpan seq, TokenSpan context) const {
  std::vector<TokenId> history(context.begin(), context.end());
  double total = 0.0;
  for (TokenId token : seq) {
    total += std::log(prob(history, token));
    history.push_back(token);
  }
  return total;
}

double perplexity(const LanguageModel& model, TokenSpan seq, TokenSpan context) {
  if (seq.empty()) throw Error(Errc::InvalidArgument, "perplexity of an empty sequence");
  const double lp = model.score(seq, context);
  if (std::isinf(lp) && lp < 0) return std::numeric_limits<double>::infinity();
  return std::exp(-lp / static_cast<double>(seq.size()));
}

ProbTrace token_prob_trace(const LanguageModel& model, TokenSpan seq,
                           const std::optional<decode::Transform>& truncation,
                           TokenSpan context) {
  std::vector<TokenId> history(context.begin(), context.end());
  ProbTrace trace;
  trace.reserve(seq.size());
  for (TokenId token : seq) {
    const auto dist = model.next_dist(history);
    if (token >= dist.size()) throw Error(Errc::InvalidArgument, "token id out of range");
    TraceEntry e{token, dist[token], dist[token]};
    if (truncation) e.truncated = decode::truncate_renormalize(dist, *truncation)[token];
    trace.push_back(e);
    history.push_back(token);
  }
  return trace;
}

}  // namespace lmeval::lm
