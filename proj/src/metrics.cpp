#include "lmeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "lmeval/corpus.hpp"
#include "lmeval/error.hpp"
#include "lmeval/rng.hpp"

namespace lmeval::metrics {

void BleuConfig::validate() const {
  if (max_n < 1) throw Error(Errc::ConfigError, "BLEU max_n must be >= 1");
  if (!(smoothing_epsilon > 0.0)) throw Error(Errc::ConfigError, "BLEU smoothing epsilon must be > 0");
  if (reference_subsample && *reference_subsample < 1) {
    throw Error(Errc::ConfigError, "BLEU subsample size must be >= 1");
  }
}

namespace {

// Shared tail of both BLEU paths so they agree bit for bit. Orders longer
// than the candidate have no n-grams at all (0/0) and are left out of the
// geometric mean, so a candidate found verbatim among the references scores 1
// at any length.
double combine(const std::vector<std::size_t>& matches, std::size_t cand_len, std::size_t ref_len,
               const BleuConfig& cfg) {
  const int orders =
      cand_len < static_cast<std::size_t>(cfg.max_n) ? static_cast<int>(cand_len) : cfg.max_n;
  double log_sum = 0.0;
  for (int n = 1; n <= orders; ++n) {
    const std::size_t m = matches[static_cast<std::size_t>(n - 1)];
    const std::size_t total = cand_len - static_cast<std::size_t>(n) + 1;
    const double p = m > 0 ? static_cast<double>(m) / static_cast<double>(total) : cfg.smoothing_epsilon;
    log_sum += std::log(p);
  }
  const double ratio = static_cast<double>(ref_len) / static_cast<double>(cand_len);
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

std::size_t closest_of(std::size_t cand_len, const std::vector<TokenSpan>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) {
      return len > cand_len ? len - cand_len : cand_len - len;
    };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

}  // namespace

double bleu(TokenSpan candidate, const std::vector<TokenSpan>& references, const BleuConfig& cfg) {
  cfg.validate();
  if (candidate.empty()) throw Error(Errc::InvalidArgument, "BLEU candidate is empty");
  if (references.empty()) throw Error(Errc::InvalidArgument, "BLEU needs at least one reference");
  std::vector<std::size_t> matches(static_cast<std::size_t>(cfg.max_n), 0);
  for (int n = 1; n <= cfg.max_n; ++n) {
    const auto cand_counts = corpus::extract_ngrams(candidate, n);
    if (cand_counts.empty()) continue;
    corpus::NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : corpus::extract_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    std::size_t m = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) m += std::min(count, it->second);
    }
    matches[static_cast<std::size_t>(n - 1)] = m;
  }
  return combine(matches, candidate.size(), closest_of(candidate.size(), references), cfg);
}

bool BleuReferenceIndex::NgramView::operator==(const NgramView& o) const noexcept {
  return n == o.n && std::equal(data, data + n, o.data);
}

std::size_t BleuReferenceIndex::ViewHash::operator()(const NgramView& v) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ v.n;
  for (std::uint32_t i = 0; i < v.n; ++i) {
    h ^= v.data[i];
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h ^ (h >> 29));
}

BleuReferenceIndex::BleuReferenceIndex(std::vector<TokenSpan> references, int max_n)
    : refs_(std::move(references)), max_n_(max_n) {
  if (max_n_ < 1) throw Error(Errc::ConfigError, "BLEU max_n must be >= 1");
  if (refs_.empty()) throw Error(Errc::InvalidArgument, "BLEU needs at least one reference");
  std::unordered_map<NgramView, std::uint32_t, ViewHash> local;
  for (std::size_t r = 0; r < refs_.size(); ++r) {
    const TokenSpan ref = refs_[r];
    sorted_lengths_.push_back(ref.size());
    for (int n = 1; n <= max_n_; ++n) {
      const auto order = static_cast<std::size_t>(n);
      if (ref.size() < order) break;
      local.clear();
      for (std::size_t i = 0; i + order <= ref.size(); ++i) {
        ++local[NgramView{ref.data() + i, static_cast<std::uint32_t>(order)}];
      }
      for (const auto& [gram, count] : local) {
        auto& mc = max_counts_[gram];
        if (count > mc.best) {
          mc.second = mc.best;
          mc.best = count;
          mc.owner = r;
        } else if (count > mc.second) {
          mc.second = count;
        }
      }
    }
  }
  std::sort(sorted_lengths_.begin(), sorted_lengths_.end());
}

std::uint32_t BleuReferenceIndex::clip_count(const NgramView& gram, std::size_t exclude) const {
  auto it = max_counts_.find(gram);
  if (it == max_counts_.end()) return 0;
  return it->second.owner == exclude ? it->second.second : it->second.best;
}

std::size_t BleuReferenceIndex::closest_length(std::size_t cand_len, std::size_t exclude) const {
  // Drop one occurrence (the first in sorted order) of the excluded length.
  const std::size_t skip_len = exclude == kNone ? kNone : refs_[exclude].size();
  auto usable = [&](std::size_t idx) {
    const bool first_of_skip = sorted_lengths_[idx] == skip_len &&
                               (idx == 0 || sorted_lengths_[idx - 1] != skip_len);
    return !first_of_skip;
  };
  const auto lb = static_cast<std::size_t>(
      std::lower_bound(sorted_lengths_.begin(), sorted_lengths_.end(), cand_len) - sorted_lengths_.begin());
  std::optional<std::size_t> below, above;
  for (std::size_t i = lb; i-- > 0;) {
    if (usable(i)) {
      below = sorted_lengths_[i];
      break;
    }
  }
  for (std::size_t i = lb; i < sorted_lengths_.size(); ++i) {
    if (usable(i)) {
      above = sorted_lengths_[i];
      break;
    }
  }
  if (!below) return *above;
  if (!above) return *below;
  const std::size_t db = cand_len - *below;
  const std::size_t da = *above - cand_len;
  return db <= da ? *below : *above;
}

double BleuReferenceIndex::score(TokenSpan candidate, const BleuConfig& cfg, std::size_t exclude) const {
  if (cfg.max_n > max_n_) throw Error(Errc::ConfigError, "index built for a lower BLEU order");
  if (candidate.empty()) throw Error(Errc::InvalidArgument, "BLEU candidate is empty");
  if (exclude != kNone && refs_.size() < 2) {
    throw Error(Errc::InsufficientSamples, "no references remain after leaving one out");
  }
  std::vector<std::size_t> matches(static_cast<std::size_t>(cfg.max_n), 0);
  std::unordered_map<NgramView, std::uint32_t, ViewHash> counts;
  for (int n = 1; n <= cfg.max_n; ++n) {
    const auto order = static_cast<std::size_t>(n);
    if (candidate.size() < order) break;
    counts.clear();
    for (std::size_t i = 0; i + order <= candidate.size(); ++i) {
      ++counts[NgramView{candidate.data() + i, static_cast<std::uint32_t>(order)}];
    }
    std::size_t m = 0;
    for (const auto& [gram, count] : counts) m += std::min(count, clip_count(gram, exclude));
    matches[order - 1] = m;
  }
  return combine(matches, candidate.size(), closest_length(candidate.size(), exclude), cfg);
}

std::vector<std::size_t> subsample_indices(std::size_t n, const BleuConfig& cfg) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (!cfg.reference_subsample || *cfg.reference_subsample >= n) return idx;
  const std::size_t k = *cfg.reference_subsample;
  SplitMix64 rng(cfg.subsample_seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(n - i))]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double corpus_bleu(const SampleSet& gen, const SampleSet& ref, const BleuConfig& cfg) {
  cfg.validate();
  if (gen.empty() || ref.empty()) throw Error(Errc::InvalidArgument, "Corpus-BLEU needs non-empty sets");
  const BleuReferenceIndex index(ref.continuations(), cfg.max_n);
  const auto chosen = subsample_indices(gen.size(), cfg);
  double sum = 0.0;
  for (std::size_t i : chosen) sum += index.score(gen.samples[i].continuation, cfg);
  return sum / static_cast<double>(chosen.size());
}

double self_bleu(const SampleSet& gen, const BleuConfig& cfg) {
  cfg.validate();
  const auto chosen = subsample_indices(gen.size(), cfg);
  if (chosen.size() < 2) throw Error(Errc::InsufficientSamples, "Self-BLEU needs at least 2 samples");
  std::vector<TokenSpan> pool;
  pool.reserve(chosen.size());
  for (std::size_t i : chosen) pool.push_back(gen.samples[i].continuation);
  const BleuReferenceIndex index(pool, cfg.max_n);
  double sum = 0.0;
  for (std::size_t j = 0; j < pool.size(); ++j) sum += index.score(pool[j], cfg, j);
  return sum / static_cast<double>(pool.size());
}

std::optional<double> seq_rep_n(TokenSpan seq, int n) {
  if (n < 1) throw Error(Errc::BadOrder, "n-gram order must be >= 1");
  const auto order = static_cast<std::size_t>(n);
  if (seq.size() < order) return std::nullopt;
  const std::size_t total = seq.size() - order + 1;
  std::unordered_set<std::vector<TokenId>, corpus::NgramHash> unique;
  for (std::size_t i = 0; i < total; ++i) {
    unique.emplace(seq.begin() + static_cast<std::ptrdiff_t>(i),
                   seq.begin() + static_cast<std::ptrdiff_t>(i + order));
  }
  return 1.0 - static_cast<double>(unique.size()) / static_cast<double>(total);
}

RepetitionSummary mean_seq_rep_n(const SampleSet& set, int n) {
  RepetitionSummary out;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : set.samples) {
    if (auto v = seq_rep_n(s.continuation, n)) {
      sum += *v;
      ++count;
    } else {
      ++out.nulls_excluded;
    }
  }
  if (count > 0) out.mean = sum / static_cast<double>(count);
  return out;
}

namespace {

double pooled_ppl(const lm::LanguageModel& scorer, const SampleSet& set) {
  double lp = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : set.samples) {
    if (s.continuation.empty()) continue;
    lp += scorer.score(s.continuation, {});
    tokens += s.continuation.size();
  }
  if (tokens == 0) throw Error(Errc::InvalidArgument, "no continuation tokens to score");
  if (std::isinf(lp)) return std::numeric_limits<double>::infinity();
  return std::exp(-lp / static_cast<double>(tokens));
}

}  // namespace

double forward_ppl(const lm::LanguageModel& scorer, const SampleSet& gen) {
  return pooled_ppl(scorer, gen);
}

double reverse_ppl(const SampleSet& gen, const SampleSet& human, const ReversePplConfig& cfg) {
  if (!(cfg.k_s > 0.0)) throw Error(Errc::ConfigError, "reverse perplexity requires k_s > 0");
  if (gen.empty() || human.empty()) throw Error(Errc::InvalidArgument, "reverse perplexity needs non-empty sets");
  std::vector<std::vector<TokenId>> train;
  train.reserve(gen.size());
  for (const auto& s : gen.samples) train.push_back(s.continuation);
  const auto scorer = lm::NGramLM::fit(train, cfg.vocab_size, cfg.order, cfg.k_s);
  return pooled_ppl(scorer, human);
}

double acceptability_penlp(const lm::LanguageModel& scorer, TokenSpan sentence, TokenSpan context,
                           double alpha) {
  if (!(alpha >= 0.0)) throw Error(Errc::ConfigError, "PenLP alpha must be >= 0");
  if (sentence.empty()) throw Error(Errc::InvalidArgument, "empty sentence");
  const double penalty = std::pow((5.0 + static_cast<double>(sentence.size())) / 6.0, alpha);
  return scorer.score(sentence, context) / penalty;
}

}  // namespace lmeval::metrics
