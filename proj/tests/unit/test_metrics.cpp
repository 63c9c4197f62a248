#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lmeval/error.hpp"
#include "lmeval/lm.hpp"
#include "lmeval/metrics.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace lmeval;
using namespace lmeval::metrics;

namespace {

SampleSet make_set(const std::vector<std::vector<TokenId>>& conts) {
  return SampleSet::from_sequences(conts, "s");
}

std::vector<TokenId> random_seq(SplitMix64& rng, std::size_t min_len, std::size_t max_len, std::size_t v) {
  std::vector<TokenId> s(min_len + rng.below(max_len - min_len + 1));
  for (auto& t : s) t = static_cast<TokenId>(rng.below(v));
  return s;
}

std::vector<TokenSpan> spans(const std::vector<std::vector<TokenId>>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("bleu examples") {
  BleuConfig cfg;
  std::vector<TokenId> s{1, 2, 3, 4, 5};
  CHECK(bleu(s, {s}, cfg) == doctest::Approx(1.0));

  // the=0 cat=1 sat=2 on=3 mat=4
  std::vector<TokenId> cand{0, 1, 2}, ref{0, 1, 2, 3, 0, 4};
  BleuConfig two;
  two.max_n = 2;
  CHECK(bleu(cand, {ref}, two) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(bleu(cand, {ref}, two) == doctest::Approx(0.3679).epsilon(1e-4));

  std::vector<TokenId> disjoint{7, 8, 9, 7, 8};
  CHECK(bleu(disjoint, {s}, cfg) == doctest::Approx(cfg.smoothing_epsilon).epsilon(1e-6));

  // orders longer than the candidate are skipped
  std::vector<TokenId> short_cand{2, 3};
  CHECK(bleu(short_cand, {short_cand, s}, cfg) == doctest::Approx(1.0));
  std::vector<TokenId> half{2, 9};
  CHECK(bleu(half, {short_cand}, cfg) == doctest::Approx(std::sqrt(0.5 * cfg.smoothing_epsilon)));

  std::vector<TokenId> empty;
  CHECK_THROWS_AS(bleu(empty, {s}, cfg), Error);
  CHECK_THROWS_AS(bleu(s, {}, cfg), Error);
  BleuConfig bad;
  bad.max_n = 0;
  CHECK_THROWS_AS(bleu(s, {s}, bad), Error);
}

TEST_CASE("bleu clips by the max reference count and picks the closest length") {
  BleuConfig one;
  one.max_n = 1;
  std::vector<TokenId> cand{5, 5, 5, 5};
  std::vector<TokenId> r1{5, 5, 1, 2}, r2{5, 3, 3, 3};
  CHECK(bleu(cand, {r1, r2}, one) == doctest::Approx(0.5));
  // lengths 2 and 6 are equally close to 4; the shorter one gives no penalty
  std::vector<TokenId> c4{1, 2, 3, 4}, short_ref{1, 2}, long_ref{1, 2, 3, 4, 5, 6};
  CHECK(bleu(c4, {long_ref, short_ref}, one) == doctest::Approx(1.0));
}

TEST_CASE("bleu equals the brute-force oracle and the index path") {
  SplitMix64 rng(101);
  for (int i = 0; i < 200; ++i) {
    BleuConfig cfg;
    cfg.max_n = 1 + static_cast<int>(rng.below(4));
    const std::size_t v = 2 + rng.below(5);
    auto cand = random_seq(rng, 1, 12, v);
    std::vector<std::vector<TokenId>> refs(1 + rng.below(5));
    for (auto& r : refs) r = random_seq(rng, 0, 12, v);
    if (std::all_of(refs.begin(), refs.end(), [](const auto& r) { return r.empty(); })) refs[0] = {0};
    const double want = oracle::bleu(cand, refs, cfg.max_n, cfg.smoothing_epsilon);
    const double naive = bleu(cand, spans(refs), cfg);
    CHECK(naive == doctest::Approx(want).epsilon(1e-9));
    BleuReferenceIndex index(spans(refs), cfg.max_n);
    CHECK(index.score(cand, cfg) == naive);
    // leave-one-out equals rebuilding without that reference
    if (refs.size() >= 2) {
      const std::size_t drop = rng.below(refs.size());
      auto rest = refs;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(drop));
      CHECK(index.score(cand, cfg, drop) == bleu(cand, spans(rest), cfg));
    }
    CHECK(naive >= 0.0);
    CHECK(naive <= 1.0 + 1e-12);
    auto with_self = refs;
    with_self.push_back(cand);
    CHECK(bleu(cand, spans(with_self), cfg) == doctest::Approx(1.0));
  }
}

TEST_CASE("corpus_bleu") {
  BleuConfig cfg;
  cfg.max_n = 2;
  auto ref = make_set({{1, 2, 3, 4}, {2, 3, 5, 1}});
  CHECK(corpus_bleu(ref, ref, cfg) == doctest::Approx(1.0));

  auto single = make_set({{1, 2, 5}});
  auto single_ref = make_set({{1, 2, 3, 4}});
  CHECK(corpus_bleu(single, single_ref, cfg) ==
        bleu(single.samples[0].continuation, {single_ref.samples[0].continuation}, cfg));

  std::vector<std::vector<TokenId>> gens{{1, 2, 9}, {3, 5, 1, 2}, {4, 4, 4, 4, 4}};
  std::vector<std::vector<TokenId>> refs{{1, 2, 3, 4}, {2, 3, 5, 1}};
  double mean = 0.0;
  for (const auto& g : gens) mean += oracle::bleu(g, refs, 2, cfg.smoothing_epsilon);
  mean /= 3;
  CHECK(corpus_bleu(make_set(gens), make_set(refs), cfg) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("self_bleu") {
  BleuConfig cfg;
  auto same = make_set({{1, 2, 3, 4}, {1, 2, 3, 4}, {1, 2, 3, 4}});
  CHECK(self_bleu(same, cfg) == doctest::Approx(1.0));

  auto disjoint = make_set({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  CHECK(self_bleu(disjoint, cfg) == doctest::Approx(cfg.smoothing_epsilon).epsilon(1e-6));

  std::vector<std::vector<TokenId>> s{{1, 2, 3, 1}, {2, 3, 1, 4, 4}, {3, 3, 2}};
  double mean = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<std::vector<TokenId>> others;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j != i) others.push_back(s[j]);
    }
    mean += oracle::bleu(s[i], others, 4, cfg.smoothing_epsilon);
  }
  CHECK(self_bleu(make_set(s), cfg) == doctest::Approx(mean / 3).epsilon(1e-12));

  CHECK_THROWS_AS(self_bleu(make_set({{1, 2}}), cfg), Error);
}

TEST_CASE("bleu aggregates are invariant to reordering and id permutation") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<TokenId>> gen(2 + rng.below(5)), ref(1 + rng.below(4));
    for (auto& g : gen) g = random_seq(rng, 1, 10, 5);
    for (auto& r : ref) r = random_seq(rng, 1, 10, 5);
    BleuConfig cfg;
    cfg.max_n = 2;
    const double cb = corpus_bleu(make_set(gen), make_set(ref), cfg);
    const double sb = self_bleu(make_set(gen), cfg);

    auto rev = gen;
    std::reverse(rev.begin(), rev.end());
    CHECK(corpus_bleu(make_set(rev), make_set(ref), cfg) == doctest::Approx(cb).epsilon(1e-12));
    CHECK(self_bleu(make_set(rev), cfg) == doctest::Approx(sb).epsilon(1e-12));

    const std::vector<TokenId> perm{3, 0, 4, 1, 2};
    auto permute = [&](std::vector<std::vector<TokenId>> v) {
      for (auto& s : v) {
        for (auto& t : s) t = perm[t];
      }
      return v;
    };
    CHECK(corpus_bleu(make_set(permute(gen)), make_set(permute(ref)), cfg) == doctest::Approx(cb).epsilon(1e-12));
    CHECK(self_bleu(make_set(permute(gen)), cfg) == doctest::Approx(sb).epsilon(1e-12));
  }
}

TEST_CASE("self_bleu does not decrease when duplicates are added") {
  SplitMix64 rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<TokenId>> gen(2 + rng.below(4));
    for (auto& g : gen) g = random_seq(rng, 2, 8, 4);
    BleuConfig cfg;
    cfg.max_n = 2;
    double prev = self_bleu(make_set(gen), cfg);
    const auto dup = gen[rng.below(gen.size())];
    for (int k = 0; k < 3; ++k) {
      gen.push_back(dup);
      const double next = self_bleu(make_set(gen), cfg);
      CHECK(next >= prev - 1e-12);
      prev = next;
    }
  }
}

TEST_CASE("subsampling picks a deterministic subset") {
  BleuConfig cfg;
  cfg.reference_subsample = 3;
  cfg.subsample_seed = 4;
  auto idx = subsample_indices(10, cfg);
  CHECK(idx.size() == 3);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(idx == subsample_indices(10, cfg));
  CHECK(subsample_indices(2, cfg).size() == 2);
}

TEST_CASE("seq_rep_n") {
  std::vector<TokenId> distinct{1, 2, 3, 4};
  CHECK(*seq_rep_n(distinct, 2) == 0.0);
  std::vector<TokenId> abab{0, 1, 0, 1, 0};
  CHECK(*seq_rep_n(abab, 2) == doctest::Approx(0.5));
  CHECK_FALSE(seq_rep_n(distinct, 5).has_value());

  SplitMix64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    auto s = random_seq(rng, 1, 30, 3);
    const int n = 1 + static_cast<int>(rng.below(4));
    auto got = seq_rep_n(s, n);
    if (s.size() < static_cast<std::size_t>(n)) {
      CHECK_FALSE(got.has_value());
    } else {
      CHECK(*got == oracle::seq_rep(s, static_cast<std::size_t>(n)));
    }
  }

  auto summary = mean_seq_rep_n(make_set({{1, 1, 1, 1}, {1, 2}, {1, 2, 3, 4}}), 3);
  CHECK(summary.nulls_excluded == 1);
  CHECK(*summary.mean == doctest::Approx(0.25));
}

TEST_CASE("forward_ppl") {
  auto u = testing::uniform_lm(6);
  CHECK(forward_ppl(u, make_set({{1, 2, 3}, {5}, {0, 0}})) == doctest::Approx(6.0));

  testing::FunctionLM m(2, [](TokenSpan ctx) {
    return ctx.empty() ? std::vector<double>{0.2, 0.8} : std::vector<double>{0.6, 0.4};
  });
  CHECK(forward_ppl(m, make_set({{1, 0}})) == doctest::Approx(std::exp(-(std::log(0.8) + std::log(0.6)) / 2)));

  // pooled over tokens, not averaged per sample
  const double lp = std::log(0.8) + std::log(0.6) + std::log(0.2);
  CHECK(forward_ppl(m, make_set({{1, 0}, {0}})) == doctest::Approx(std::exp(-lp / 3)));

  std::vector<std::vector<TokenId>> rep(10, {1, 2, 1, 2, 1, 2});
  std::vector<std::vector<TokenId>> diverse;
  SplitMix64 rng(3);
  for (int i = 0; i < 10; ++i) diverse.push_back(random_seq(rng, 6, 6, 5));
  auto fit_rep = lm::NGramLM::fit(rep, 5, 2, 1.0);
  auto fit_div = lm::NGramLM::fit(diverse, 5, 2, 1.0);
  CHECK(forward_ppl(fit_rep, make_set(rep)) < forward_ppl(fit_div, make_set(diverse)));
}

TEST_CASE("reverse_ppl") {
  // hand-fit bigram, k_s = 1, |V| = 2 on gen [0,0,1]:
  //   p(0) = (2+1)/(3+2), p(1|0) = (1+1)/(2+2)
  ReversePplConfig cfg{2, 2, 1.0};
  const double want = std::exp(-(std::log(0.6) + std::log(0.5)) / 2);
  CHECK(reverse_ppl(make_set({{0, 0, 1}}), make_set({{0, 1}}), cfg) == doctest::Approx(want).epsilon(1e-12));

  std::vector<std::vector<TokenId>> corpus{{0, 1, 2, 3}, {2, 3, 1, 0}, {1, 1, 2}};
  const auto fit = lm::NGramLM::fit(corpus, 4, 2, 1.0);
  CHECK(reverse_ppl(make_set(corpus), make_set(corpus), {4, 2, 1.0}) ==
        doctest::Approx(forward_ppl(fit, make_set(corpus))).epsilon(1e-12));

  CHECK_THROWS_AS(reverse_ppl(make_set(corpus), make_set(corpus), {4, 2, 0.0}), Error);
}

TEST_CASE("acceptability_penlp") {
  testing::FunctionLM m(3, [](TokenSpan) { return std::vector<double>{0.5, 0.25, 0.25}; });
  std::vector<TokenId> s{0, 1};
  const double raw = std::log(0.5) + std::log(0.25);
  CHECK(acceptability_penlp(m, s, {}, 0.0) == doctest::Approx(raw));
  std::vector<TokenId> one{1};
  CHECK(acceptability_penlp(m, one, {}, 0.6) == doctest::Approx(std::log(0.25)));
  std::vector<TokenId> thirteen(13, 0);
  CHECK(acceptability_penlp(m, thirteen, {}, 0.6) == doctest::Approx(13 * std::log(0.5) / 1.9332).epsilon(1e-4));
  CHECK(std::pow(3.0, 0.6) == doctest::Approx(1.9332).epsilon(1e-4));
  CHECK_THROWS_AS(acceptability_penlp(m, s, {}, -1.0), Error);
}
