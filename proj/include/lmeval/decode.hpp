#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lmeval/rng.hpp"
#include "lmeval/vocab.hpp"

namespace lmeval::lm {
class LanguageModel;
}

namespace lmeval::decode {

struct TopK {
  std::size_t k;
};
struct TopP {
  double p;
};
struct Temperature {
  double t;
};
using Transform = std::variant<TopK, TopP, Temperature>;

/// Tokens ordered by probability descending, ties by lower id first.
std::vector<TokenId> rank_tokens(std::span<const double> dist);

/// topk keeps the k most probable tokens; topp keeps the shortest ranked
/// prefix whose mass reaches p; both renormalize. temperature returns
/// softmax(ln dist / t). Degenerate settings (k >= |V|, p >= 1, t == 1)
/// return `dist` unchanged.
std::vector<double> truncate_renormalize(std::span<const double> dist, const Transform& mode);

/// softmax over lp_i = theta * ln(dist_i) for i in `generated`, ln(dist_i)
/// otherwise. theta > 1 lowers the probability of already generated tokens.
std::vector<double> penalize(std::span<const double> dist, std::span<const TokenId> generated,
                             double theta);

/// Inverse-CDF draw over ranked tokens for a given uniform variate in [0, 1).
TokenId sample_at(std::span<const double> dist, double u);
/// Consumes exactly one variate from `rng`.
TokenId sample(std::span<const double> dist, SplitMix64& rng);

/// Argmax with ties going to the lower id.
TokenId argmax(std::span<const double> dist);

enum class Strategy { Greedy, Beam, Temperature, TopK, TopP, Penalized };

Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy s) noexcept;

struct DecoderConfig {
  Strategy strategy = Strategy::Greedy;
  std::optional<int> b;
  std::optional<double> t;
  std::optional<int> k;
  std::optional<double> p;
  std::optional<double> theta;
  std::uint64_t seed = 0;
  std::size_t max_len = 1;

  /// Builds a config whose single parameter is `param` (ignored for greedy).
  static DecoderConfig make(Strategy strategy, std::optional<double> param, std::uint64_t seed,
                            std::size_t max_len);

  /// The strategy's own parameter, or nullopt for greedy.
  std::optional<double> param() const;

  /// Throws ConfigError when the parameter set does not match the strategy or
  /// a value is out of range. Penalized additionally accepts t, which turns
  /// the argmax into a temperature draw.
  void validate(std::size_t vocab_size) const;
};

/// Generates exactly cfg.max_len tokens after `prefix`. Pure in
/// (model, prefix, cfg); the sampler state is local to the call.
std::vector<TokenId> generate(const lm::LanguageModel& model, TokenSpan prefix,
                              const DecoderConfig& cfg);

}  // namespace lmeval::decode
