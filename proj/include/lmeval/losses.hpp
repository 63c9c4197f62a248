#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmeval/corpus.hpp"
#include "lmeval/ffn.hpp"

namespace lmeval::losses {

using lm::FeedForwardLM;

// Every loss below returns its value and, when `grad` is non-empty (size
// param_count()), adds weight * dLoss/dparams into it.

/// C^t per position t of the scored sequence. C^t never contains seq[t].
using NegativeCandidates = std::vector<std::vector<TokenId>>;

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Runs `fn` with a zeroed gradient buffer and returns both.
LossAndGrad with_grad(const FeedForwardLM& model,
                      const std::function<double(std::span<double>)>& fn);

/// Mean over positions t >= 1 of -ln p(seq[t] | seq[<t]). Requires
/// len(seq) > context window.
double ce_loss(const FeedForwardLM& model, TokenSpan seq, std::span<double> grad = {},
               double weight = 1.0);

/// Mean over positions [from, len) of -ln p(seq[t] | seq[<t]).
double mean_nll(const FeedForwardLM& model, TokenSpan seq, std::size_t from,
                std::span<double> grad = {}, double weight = 1.0);

inline constexpr double kUnlikelihoodEps = 1e-12;

/// Token-level candidates: every earlier token of the sequence, minus seq[t].
NegativeCandidates token_candidates(TokenSpan seq);

/// Sum over c in C^t of -ln(1 - min(p(c | seq[<t]), 1 - eps)), averaged over
/// positions [from, len). Throws InvalidArgument for malformed candidates.
double ul_token_loss(const FeedForwardLM& model, TokenSpan seq, const NegativeCandidates& cands,
                     std::span<double> grad = {}, double weight = 1.0, std::size_t from = 1);

/// Same loss for sequence-level candidates, which are the generated tokens
/// themselves, so a candidate may equal seq[t].
double ul_sequence_loss(const FeedForwardLM& model, TokenSpan seq, const NegativeCandidates& cands,
                        std::span<double> grad = {}, double weight = 1.0, std::size_t from = 1);

/// C^t = {x_t} iff the n-gram ending at t already occurred earlier.
NegativeCandidates ul_seq_candidates(TokenSpan continuation, int n);

struct MarginResult {
  double loss;
  double ppl_pos;
  double ppl_neg;
};

/// max(0, ppl(pos) - ppl(neg) + margin), each perplexity taken over the
/// pair's second sentence given its first.
MarginResult margin_rank_loss(const FeedForwardLM& model, const corpus::SentencePair& pos,
                              const corpus::SentencePair& neg, double margin,
                              std::span<double> grad = {}, double weight = 1.0);

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise; returns (loss, dloss/dpred).
std::pair<double, double> smooth_l1_loss(double pred, double target);

/// Mean smooth-L1 between the regression head and per-position targets.
/// NaN targets are skipped. Throws NoSupervision if none remain.
double tfidf_loss(const FeedForwardLM& model, TokenSpan seq, std::span<const double> targets,
                  std::span<double> grad = {}, double weight = 1.0);

// --- label supervision -----------------------------------------------------

/// Interned label names. Id 0 is always "X", the label for sub-tokens and
/// unalignable tokens; it is never a training target.
class LabelSet {
 public:
  static constexpr int kX = 0;
  static constexpr int kUnlabeled = -1;

  LabelSet() : names_{"X"} {}
  explicit LabelSet(std::vector<std::string> names);

  int intern(const std::string& name);
  int id(const std::string& name) const;
  const std::string& name(int id) const;
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

struct WordLabel {
  std::string surface;
  std::string label;
};

/// Transfers word-level labels onto model sub-tokens: the first sub-token of
/// each word carries its label, continuation sub-tokens get X. Words with an
/// empty label yield kUnlabeled on their first sub-token. Leading '#'
/// continuation markers on model tokens are ignored for matching. Throws
/// AlignmentError when the character streams differ.
std::vector<int> align_labels(std::span<const WordLabel> words,
                              std::span<const std::string> model_tokens, LabelSet& labels);

/// Mean cross-entropy of the classification head over positions whose label
/// is neither X nor unlabeled. Throws NoSupervision if all are masked.
double classification_loss(const FeedForwardLM& model, TokenSpan seq, std::span<const int> labels,
                           std::span<double> grad = {}, double weight = 1.0);

// --- verification ------------------------------------------------------------

using LossFn = std::function<double(const FeedForwardLM&, std::span<double>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  bool passed = false;
};

/// Central differences with step 1e-5 on every parameter, compared to the
/// analytic gradient by |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const FeedForwardLM& model, const LossFn& loss, double tolerance);

}  // namespace lmeval::losses
