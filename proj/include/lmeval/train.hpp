#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmeval/corpus.hpp"
#include "lmeval/ffn.hpp"
#include "lmeval/rng.hpp"

namespace lmeval::losses {

enum class Objective { Mle, Unlikelihood, MarginRank, Tfidf, Classify };

Objective parse_objective(std::string_view name);
std::string_view objective_name(Objective o) noexcept;

struct SeqUlConfig {
  double mix_prob = 0.5;  // chance a step uses the sequence-level UL branch
  std::size_t prefix_len = 50;
  std::size_t gen_len = 100;
  int ngram = 4;
};

struct TrainConfig {
  int epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::vector<std::pair<Objective, double>> objectives{{Objective::Mle, 1.0}};
  SeqUlConfig seq_ul;
  double margin = 1.0;
  std::uint64_t seed = 0;

  double weight(Objective o) const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8 by default).
class Adam {
 public:
  explicit Adam(std::size_t n_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  std::uint64_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

/// One training sequence with optional token-level supervision.
struct TrainItem {
  std::vector<TokenId> tokens;
  std::vector<double> tfidf;  // per position; NaN = unsupervised; empty = none
  std::vector<int> labels;    // per position; <= 0 masked; empty = none
};

struct Batch {
  std::vector<TrainItem> items;
  std::vector<corpus::PairExample> pairs;
};

struct StepReport {
  double total = 0.0;
  std::map<Objective, double> losses;
  bool sequence_level = false;
};

/// total = sum_i weight_i * loss_i over the batch (each loss averaged over
/// batch members), followed by one Adam update. When unlikelihood is
/// weighted, one Bernoulli(mix_prob) draw per step chooses between the
/// sequence-level branch (greedy continuation of each item's prefix, repeated
/// n-grams as candidates) and the token-level branch. Items not longer than
/// the context window are skipped by the LM objectives.
StepReport multitask_step(lm::FeedForwardLM& model, const Batch& batch, const TrainConfig& cfg,
                          Adam& optimizer, SplitMix64& rng);

struct TrainData {
  std::vector<TrainItem> items;
  std::vector<corpus::PairExample> pairs;
};

using StepCallback = std::function<void(int epoch, std::size_t step, const StepReport&)>;

/// Epoch loop: items are shuffled each epoch with the config seed, batched in
/// order, and pairs are batched alongside (cycling if there are fewer pair
/// batches). Fully deterministic under cfg.seed.
std::vector<StepReport> train(lm::FeedForwardLM& model, const TrainData& data,
                              const TrainConfig& cfg, const StepCallback& on_step = {});

}  // namespace lmeval::losses
