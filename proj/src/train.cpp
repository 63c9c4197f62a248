#include "lmeval/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmeval/decode.hpp"
#include "lmeval/error.hpp"
#include "lmeval/losses.hpp"

namespace lmeval::losses {

Objective parse_objective(std::string_view name) {
  if (name == "mle" || name == "ce") return Objective::Mle;
  if (name == "ul" || name == "unlikelihood") return Objective::Unlikelihood;
  if (name == "margin" || name == "nsp" || name == "sop") return Objective::MarginRank;
  if (name == "tfidf") return Objective::Tfidf;
  if (name == "classify" || name == "pos" || name == "dp") return Objective::Classify;
  throw Error(Errc::ConfigError, "unknown objective '" + std::string(name) + "'");
}

std::string_view objective_name(Objective o) noexcept {
  switch (o) {
    case Objective::Mle: return "mle";
    case Objective::Unlikelihood: return "ul";
    case Objective::MarginRank: return "margin";
    case Objective::Tfidf: return "tfidf";
    case Objective::Classify: return "classify";
  }
  return "mle";
}

double TrainConfig::weight(Objective o) const {
  double w = 0.0;
  for (const auto& [kind, value] : objectives) {
    if (kind == o) w += value;
  }
  return w;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::ConfigError, why); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(seq_ul.mix_prob >= 0.0 && seq_ul.mix_prob <= 1.0)) fail("mix_prob must lie in [0, 1]");
  if (seq_ul.ngram < 1) fail("seq_ul.ngram must be >= 1");
  if (seq_ul.prefix_len < 1 || seq_ul.gen_len < 1) fail("seq_ul prefix_len and gen_len must be >= 1");
  if (!(margin >= 0.0)) fail("margin must be >= 0");
  bool any_positive = false;
  for (const auto& [kind, w] : objectives) {
    if (!(w >= 0.0)) fail("objective weights must be >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) fail("at least one objective weight must be > 0");
}

Adam::Adam(std::size_t n_params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(Errc::InvalidArgument, "optimizer state does not match the parameter count");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

namespace {

double sequence_level_ul(const lm::FeedForwardLM& model, const TrainItem& item,
                         const SeqUlConfig& cfg, std::span<double> grad, double weight) {
  const std::size_t prefix_len = std::min(cfg.prefix_len, item.tokens.size());
  std::vector<TokenId> seq(item.tokens.begin(),
                           item.tokens.begin() + static_cast<std::ptrdiff_t>(prefix_len));
  auto dc = decode::DecoderConfig::make(decode::Strategy::Greedy, std::nullopt, 0, cfg.gen_len);
  const auto continuation = decode::generate(model, seq, dc);
  auto cont_cands = ul_seq_candidates(continuation, cfg.ngram);

  NegativeCandidates cands(prefix_len);
  cands.insert(cands.end(), std::make_move_iterator(cont_cands.begin()),
               std::make_move_iterator(cont_cands.end()));
  seq.insert(seq.end(), continuation.begin(), continuation.end());
  return ul_sequence_loss(model, seq, cands, grad, weight, prefix_len);
}

bool has_finite(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool has_label(const std::vector<int>& v) {
  return std::any_of(v.begin(), v.end(), [](int l) { return l > LabelSet::kX; });
}

}  // namespace

StepReport multitask_step(lm::FeedForwardLM& model, const Batch& batch, const TrainConfig& cfg,
                          Adam& optimizer, SplitMix64& rng) {
  if (batch.items.empty() && batch.pairs.empty()) {
    throw Error(Errc::InvalidArgument, "empty training batch");
  }
  std::vector<double> grad(model.param_count(), 0.0);
  StepReport report;

  // LM objectives need sequences longer than the input window; shorter items
  // (e.g. labelled sentences) only feed the heads.
  std::vector<const TrainItem*> lm_items;
  for (const auto& item : batch.items) {
    if (item.tokens.size() > model.dims().context) lm_items.push_back(&item);
  }
  const double m = static_cast<double>(lm_items.size());
  if (const double w = cfg.weight(Objective::Mle); w > 0.0 && !lm_items.empty()) {
    double sum = 0.0;
    for (const auto* item : lm_items) sum += ce_loss(model, item->tokens, grad, w / m);
    report.losses[Objective::Mle] = sum / m;
  }

  if (const double w = cfg.weight(Objective::Unlikelihood); w > 0.0 && !lm_items.empty()) {
    report.sequence_level = rng.uniform() < cfg.seq_ul.mix_prob;
    double sum = 0.0;
    for (const auto* item : lm_items) {
      if (report.sequence_level) {
        sum += sequence_level_ul(model, *item, cfg.seq_ul, grad, w / m);
      } else {
        sum += ul_token_loss(model, item->tokens, token_candidates(item->tokens), grad, w / m);
      }
    }
    report.losses[Objective::Unlikelihood] = sum / m;
  }

  if (const double w = cfg.weight(Objective::MarginRank); w > 0.0 && !batch.pairs.empty()) {
    const double n = static_cast<double>(batch.pairs.size());
    double sum = 0.0;
    for (const auto& pair : batch.pairs) {
      sum += margin_rank_loss(model, pair.positive, pair.negative, cfg.margin, grad, w / n).loss;
    }
    report.losses[Objective::MarginRank] = sum / n;
  }

  if (const double w = cfg.weight(Objective::Tfidf); w > 0.0) {
    std::vector<const TrainItem*> eligible;
    for (const auto& item : batch.items) {
      if (has_finite(item.tfidf)) eligible.push_back(&item);
    }
    if (!eligible.empty()) {
      const double n = static_cast<double>(eligible.size());
      double sum = 0.0;
      for (const auto* item : eligible) sum += tfidf_loss(model, item->tokens, item->tfidf, grad, w / n);
      report.losses[Objective::Tfidf] = sum / n;
    }
  }

  if (const double w = cfg.weight(Objective::Classify); w > 0.0) {
    std::vector<const TrainItem*> eligible;
    for (const auto& item : batch.items) {
      if (has_label(item.labels)) eligible.push_back(&item);
    }
    if (!eligible.empty()) {
      const double n = static_cast<double>(eligible.size());
      double sum = 0.0;
      for (const auto* item : eligible) {
        sum += classification_loss(model, item->tokens, item->labels, grad, w / n);
      }
      report.losses[Objective::Classify] = sum / n;
    }
  }

  for (const auto& [kind, value] : report.losses) report.total += cfg.weight(kind) * value;
  optimizer.step(model.params(), grad);
  return report;
}

std::vector<StepReport> train(lm::FeedForwardLM& model, const TrainData& data,
                              const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (data.items.empty() && data.pairs.empty()) throw Error(Errc::EmptyInput, "no training data");

  Adam optimizer(model.param_count(), cfg.learning_rate);
  SplitMix64 shuffle_rng(cfg.seed);
  SplitMix64 step_rng(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ULL);

  auto shuffled = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }
    return order;
  };
  auto n_batches = [&](std::size_t n) { return (n + cfg.batch_size - 1) / cfg.batch_size; };

  std::vector<StepReport> reports;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto item_order = shuffled(data.items.size());
    const auto pair_order = shuffled(data.pairs.size());
    const std::size_t item_batches = n_batches(data.items.size());
    const std::size_t pair_batches = n_batches(data.pairs.size());
    const std::size_t steps = item_batches > 0 ? item_batches : pair_batches;
    for (std::size_t s = 0; s < steps; ++s) {
      Batch batch;
      for (std::size_t i = s * cfg.batch_size; i < std::min(data.items.size(), (s + 1) * cfg.batch_size); ++i) {
        batch.items.push_back(data.items[item_order[i]]);
      }
      if (pair_batches > 0) {
        const std::size_t ps = s % pair_batches;
        for (std::size_t i = ps * cfg.batch_size;
             i < std::min(data.pairs.size(), (ps + 1) * cfg.batch_size); ++i) {
          batch.pairs.push_back(data.pairs[pair_order[i]]);
        }
      }
      reports.push_back(multitask_step(model, batch, cfg, optimizer, step_rng));
      if (on_step) on_step(epoch, s, reports.back());
    }
  }
  return reports;
}

}  // namespace lmeval::losses
