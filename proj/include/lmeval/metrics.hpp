#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmeval/lm.hpp"
#include "lmeval/sample_set.hpp"

namespace lmeval::metrics {

struct BleuConfig {
  int max_n = 4;
  double smoothing_epsilon = 1e-9;
  std::optional<std::size_t> reference_subsample;  // nullopt = use all candidates
  std::uint64_t subsample_seed = 0;

  void validate() const;
};

/// Sentence BLEU: geometric mean of clipped n-gram precisions (n = 1..max_n,
/// zero precisions replaced by epsilon; orders longer than the candidate are
/// skipped) times exp(min(0, 1 - r/c)), where r
/// is the closest reference length (ties go to the shorter). This is the
/// direct O(candidate x references) computation.
double bleu(TokenSpan candidate, const std::vector<TokenSpan>& references, const BleuConfig& cfg);

/// Hashed n-gram index over a reference pool. For each n-gram it keeps the
/// largest and second-largest per-reference counts (with the owner of the
/// largest), so a reference can be left out in O(1) for Self-BLEU. Scores are
/// identical to bleu() against the same pool.
class BleuReferenceIndex {
 public:
  BleuReferenceIndex(std::vector<TokenSpan> references, int max_n);

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  /// BLEU against every reference except index `exclude`.
  double score(TokenSpan candidate, const BleuConfig& cfg, std::size_t exclude = kNone) const;

  std::size_t size() const noexcept { return refs_.size(); }

 private:
  struct NgramView {
    const TokenId* data;
    std::uint32_t n;
    bool operator==(const NgramView& o) const noexcept;
  };
  struct ViewHash {
    std::size_t operator()(const NgramView& v) const noexcept;
  };
  struct MaxCounts {
    std::uint32_t best = 0;
    std::uint32_t second = 0;
    std::size_t owner = kNone;
  };

  std::uint32_t clip_count(const NgramView& gram, std::size_t exclude) const;
  std::size_t closest_length(std::size_t cand_len, std::size_t exclude) const;

  std::vector<TokenSpan> refs_;
  int max_n_;
  std::unordered_map<NgramView, MaxCounts, ViewHash> max_counts_;
  std::vector<std::size_t> sorted_lengths_;
};

/// Mean BLEU of (optionally subsampled) generated continuations against all
/// reference continuations.
double corpus_bleu(const SampleSet& gen, const SampleSet& ref, const BleuConfig& cfg);

/// Mean leave-one-out BLEU within the (optionally subsampled) set. Throws
/// InsufficientSamples for fewer than 2 samples.
double self_bleu(const SampleSet& gen, const BleuConfig& cfg);

/// 1 - |unique n-grams| / |n-grams|; nullopt when len(seq) < n.
std::optional<double> seq_rep_n(TokenSpan seq, int n);

struct RepetitionSummary {
  std::optional<double> mean;
  std::size_t nulls_excluded = 0;
};
RepetitionSummary mean_seq_rep_n(const SampleSet& set, int n);

/// Token-weighted perplexity of every continuation under `scorer`.
double forward_ppl(const lm::LanguageModel& scorer, const SampleSet& gen);

struct ReversePplConfig {
  std::size_t vocab_size = 0;
  int order = 2;
  double k_s = 1.0;
};

/// Fits a fresh n-gram scorer on the generated continuations and returns its
/// token-weighted perplexity on the human continuations. k_s must be > 0.
double reverse_ppl(const SampleSet& gen, const SampleSet& human, const ReversePplConfig& cfg);

/// ln p(sentence | context) / ((5 + |sentence|) / 6)^alpha.
double acceptability_penlp(const lm::LanguageModel& scorer, TokenSpan sentence,
                           TokenSpan context, double alpha = 0.6);

/// Indices of the candidates that enter Corpus-/Self-BLEU after subsampling,
/// in ascending order.
std::vector<std::size_t> subsample_indices(std::size_t n, const BleuConfig& cfg);

}  // namespace lmeval::metrics
