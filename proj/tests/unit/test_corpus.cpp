#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lmeval/corpus.hpp"
#include "lmeval/error.hpp"
#include "lmeval/rng.hpp"

using namespace lmeval;
using namespace lmeval::corpus;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an lmeval::Error");
  return Errc::InvalidArgument;
}

std::vector<TokenId> seq_of(std::size_t n) {
  std::vector<TokenId> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<TokenId>(i % 5);
  return s;
}

}  // namespace

TEST_CASE("tokenize word and char schemes") {
  auto a = tokenize("a a a", Scheme::Word);
  CHECK(a.ids == std::vector<TokenId>{0, 0, 0});
  CHECK(a.vocab->size() == 1);

  CHECK(split_tokens("Hi, there", Scheme::Word) == std::vector<std::string>{"Hi", ",", "there"});

  auto c = tokenize("ab", Scheme::Char);
  CHECK(c.size() == 2);
  CHECK(c.vocab->size() == 2);

  CHECK(code_of([] { tokenize("  \n\t ", Scheme::Word); }) == Errc::EmptyInput);
  CHECK(code_of([] { tokenize("", Scheme::Char); }) == Errc::EmptyInput);
}

TEST_CASE("tokenize normalizes line endings and strips a BOM") {
  auto a = tokenize("\xEF\xBB\xBFx\r\ny\rz", Scheme::Char);
  CHECK(detokenize(a.ids, *a.vocab, Scheme::Char) == "x\ny\nz");
}

TEST_CASE("char detokenize inverts tokenize including multibyte text") {
  const std::string text = "Grüße, 世界! a  b\n";
  auto t = tokenize(text, Scheme::Char);
  CHECK(detokenize(t.ids, *t.vocab, Scheme::Char) == text);
  CHECK(t.size() == 16);
}

TEST_CASE("word scheme detaches every punctuation character") {
  CHECK(split_tokens("end.\"  (x)", Scheme::Word) ==
        std::vector<std::string>{"end", ".", "\"", "(", "x", ")"});
}

TEST_CASE("encode maps unknown surfaces to <unk> or throws") {
  Vocab v({"a", "b"});
  CHECK(code_of([&] { encode("a c", Scheme::Word, v); }) == Errc::UnknownToken);
  v.add(kUnkToken);
  CHECK(encode("a c b", Scheme::Word, v) == std::vector<TokenId>{0, 2, 1});
}

TEST_CASE("vocab rejects duplicates and is dense") {
  CHECK(code_of([] { Vocab({"x", "x"}); }) == Errc::FormatError);
  Vocab v;
  CHECK(v.add("p") == 0);
  CHECK(v.add("q") == 1);
  CHECK(v.add("p") == 0);
  CHECK(v.id_of("q") == 1);
  CHECK(code_of([&] { v.id_of("r"); }) == Errc::UnknownToken);
  CHECK(Vocab::numeric(3).token(2) == "2");
}

TEST_CASE("split_corpus floor rule") {
  auto s = split_corpus(seq_of(100), 10, {0.8, 0.1, 0.1});
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);

  auto three = split_corpus(seq_of(35), 10, {0.5, 0.3, 0.2});
  CHECK(three.train.size() == 1);
  CHECK(three.dev.size() == 1);
  CHECK(three.test.size() == 1);

  // 7,776 chunks: the floor rule gives 6220/777/779
  auto big = split_corpus(seq_of(7776 * 2), 2, {0.8, 0.1, 0.1});
  CHECK(big.train.size() == 6220);
  CHECK(big.dev.size() == 777);
  CHECK(big.test.size() == 779);
}

TEST_CASE("split_corpus preserves chunk order and content") {
  SplitMix64 rng(11);
  std::vector<TokenId> seq(257);
  for (auto& t : seq) t = static_cast<TokenId>(rng.below(9));
  auto s = split_corpus(seq, 16, {0.6, 0.2, 0.2});
  std::vector<TokenId> joined;
  for (auto* part : {&s.train, &s.dev, &s.test}) {
    for (const auto& chunk : *part) {
      CHECK(chunk.size() == 16);
      joined.insert(joined.end(), chunk.begin(), chunk.end());
    }
  }
  CHECK(joined.size() == 256);
  CHECK(std::equal(joined.begin(), joined.end(), seq.begin()));
}

TEST_CASE("split_corpus errors") {
  CHECK(code_of([] { split_corpus(seq_of(29), 10, {0.8, 0.1, 0.1}); }) == Errc::CorpusTooSmall);
  CHECK(code_of([] { split_corpus(seq_of(100), 10, {0.8, 0.1, 0.2}); }) == Errc::ConfigError);
  CHECK(code_of([] { split_corpus(seq_of(100), 0, {0.8, 0.1, 0.1}); }) == Errc::ConfigError);
}

TEST_CASE("extract_ngrams examples") {
  std::vector<TokenId> a{1, 2, 3};
  auto g = extract_ngrams(a, 1);
  CHECK(g.size() == 3);
  CHECK(g.at({1}) == 1);
  CHECK(g.at({3}) == 1);

  std::vector<TokenId> b{1, 2, 1, 2};
  auto g2 = extract_ngrams(b, 2);
  CHECK(g2.size() == 2);
  CHECK(g2.at({1, 2}) == 2);
  CHECK(g2.at({2, 1}) == 1);

  std::vector<TokenId> c{1};
  CHECK(extract_ngrams(c, 2).empty());
  CHECK(code_of([&] { extract_ngrams(c, 0); }) == Errc::BadOrder);
}

TEST_CASE("extract_ngrams total count is len - n + 1") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenId> s(rng.below(20));
    for (auto& t : s) t = static_cast<TokenId>(rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(4));
    std::size_t total = 0;
    for (const auto& [gram, count] : extract_ngrams(s, n)) {
      CHECK(gram.size() == static_cast<std::size_t>(n));
      total += count;
    }
    CHECK(total == (s.size() >= static_cast<std::size_t>(n) ? s.size() - n + 1 : 0));
  }
}

TEST_CASE("segment_sentences") {
  CHECK(segment_sentences("Hello. World.") == std::vector<std::string>{"Hello.", "World."});
  CHECK(segment_sentences("Hi! how are you") == std::vector<std::string>{"Hi! how are you"});
  CHECK(segment_sentences("").empty());
  CHECK(segment_sentences("Is it? Yes! Done") ==
        std::vector<std::string>{"Is it?", "Yes!", "Done"});
}

TEST_CASE("build_pair_datasets") {
  std::vector<std::vector<TokenId>> sents;
  for (TokenId i = 0; i < 12; ++i) sents.push_back({i, static_cast<TokenId>(i + 100)});

  auto sop = build_pair_datasets(sents, PairMode::SOP, 6, 3);
  CHECK(sop.size() == 6);
  std::set<TokenId> firsts;
  for (const auto& ex : sop) {
    CHECK(ex.positive.label == PairLabel::Positive);
    CHECK(ex.negative.label == PairLabel::Negative);
    CHECK(ex.positive.second[0] == ex.positive.first[0] + 1);
    CHECK(ex.negative.first == ex.positive.second);
    CHECK(ex.negative.second == ex.positive.first);
    firsts.insert(ex.positive.first[0]);
  }
  CHECK(firsts.size() == 6);  // distinct adjacent pairs

  auto nsp = build_pair_datasets(sents, PairMode::NSP, 11, 9);
  for (const auto& ex : nsp) {
    CHECK(ex.negative.first == ex.positive.first);
    CHECK(ex.negative.second != ex.positive.second);
  }
  CHECK(build_pair_datasets(sents, PairMode::NSP, 11, 9)[4].negative.second ==
        nsp[4].negative.second);

  CHECK(code_of([&] { build_pair_datasets(sents, PairMode::SOP, 12, 0); }) ==
        Errc::InsufficientData);
}

TEST_CASE("tfidf scores") {
  std::vector<TokenId> same{1, 1, 1, 1, 1, 1};
  auto t0 = tfidf_scores(same, 3);
  CHECK(t0.n_docs() == 2);
  CHECK(t0.score(0, 1) == 0.0);
  CHECK(t0.score(1, 1) == 0.0);

  std::vector<TokenId> seq{7, 7, 1, 2, 1, 2, 3, 4};
  auto t = tfidf_scores(seq, 4);
  CHECK(t.score(0, 7) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(t.score(0, 7) == doctest::Approx(0.3466).epsilon(1e-4));
  CHECK(t.score(1, 7) == 0.0);
  CHECK(t.score(0, 1) == 0.0);  // in both docs

  auto targets = t.position_targets(seq);
  CHECK(targets.size() == seq.size());
  CHECK(targets[0] == doctest::Approx(t.score(0, 7)));
  CHECK(targets[6] == doctest::Approx(0.25 * std::log(2.0)));

  std::vector<TokenId> remainder{1, 2, 3, 4, 5};
  auto tr = tfidf_scores(remainder, 2);
  CHECK(std::isnan(tr.position_targets(remainder)[4]));

  CHECK(code_of([] {
          std::vector<TokenId> s{1, 2};
          tfidf_scores(s, 3);
        }) == Errc::CorpusTooSmall);
}
