#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmeval/corpus.hpp"
#include "lmeval/decode.hpp"
#include "lmeval/vocab.hpp"

namespace lmeval::lm {

/// Next-token distribution and log-probability scoring over a fixed vocabulary.
/// Implementations are immutable once built, so concurrent scoring is safe.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string backend() const = 0;
  virtual std::size_t vocab_size() const = 0;

  /// p(. | context); non-negative, sums to 1.
  virtual std::vector<double> next_dist(TokenSpan context) const = 0;

  /// Sum over t of ln p(seq[t] | context ++ seq[0..t)). May be -inf.
  virtual double score(TokenSpan seq, TokenSpan context) const;
};

/// Add-k smoothed n-gram model over counted contexts of length 0..order-1.
///
///   p(w | ctx) = (count(ctx w) + k) / (count(ctx) + k |V|)
///
/// `ctx` is the longest available suffix of the history, capped at order-1
/// tokens. With k > 0 an unseen context yields the uniform distribution; with
/// k = 0 the estimate is undefined there and the model backs off to the next
/// shorter context instead.
class NGramLM final : public LanguageModel {
 public:
  struct ContextStats {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> next;
  };
  using Table = std::unordered_map<std::vector<TokenId>, ContextStats, corpus::NgramHash>;

  /// Throws EmptyInput when `train` holds no tokens.
  static NGramLM fit(const std::vector<std::vector<TokenId>>& train, std::size_t vocab_size,
                     int order, double k_s);

  NGramLM(std::size_t vocab_size, int order, double k_s, Table table);

  std::string backend() const override { return "ngram"; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_dist(TokenSpan context) const override;
  double score(TokenSpan seq, TokenSpan context) const override;

  double prob(TokenSpan history, TokenId token) const;

  int order() const noexcept { return order_; }
  double smoothing() const noexcept { return k_s_; }
  const Table& table() const noexcept { return table_; }

 private:
  const ContextStats* lookup(TokenSpan history, std::size_t len) const;

  std::size_t vocab_size_;
  int order_;
  double k_s_;
  Table table_;
};

/// exp(-score(seq | context) / len(seq)). Returns +inf when some token has
/// probability 0. Only `seq` tokens are counted; `context` conditions.
double perplexity(const LanguageModel& model, TokenSpan seq, TokenSpan context = {});

struct TraceEntry {
  TokenId token;
  double raw;
  double truncated;
};
using ProbTrace = std::vector<TraceEntry>;

/// Per-position probability of each token of `seq`, both raw and after the
/// decoding transform (when given) is applied to the next-token distribution.
ProbTrace token_prob_trace(const LanguageModel& model, TokenSpan seq,
                           const std::optional<decode::Transform>& truncation,
                           TokenSpan context = {});

}  // namespace lmeval::lm
