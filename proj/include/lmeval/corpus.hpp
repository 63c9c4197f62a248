#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmeval/vocab.hpp"

namespace lmeval::corpus {

enum class Scheme { Word, Char };

Scheme parse_scheme(std::string_view name);
std::string_view scheme_name(Scheme scheme) noexcept;

/// Surface tokens of `text`. Word: split on Unicode whitespace, each
/// punctuation character detached as its own token. Char: one token per
/// Unicode scalar value (whitespace included).
std::vector<std::string> split_tokens(std::string_view text, Scheme scheme);

/// Tokenizes and builds a vocabulary in first-occurrence order.
/// Throws EmptyInput when nothing remains after normalization.
TokenSequence tokenize(std::string_view text, Scheme scheme);

/// Encodes against an existing vocabulary. Unknown surfaces map to `<unk>`
/// when the vocabulary has one, otherwise UnknownToken is thrown.
std::vector<TokenId> encode(std::string_view text, Scheme scheme, const Vocab& vocab);

/// Char scheme concatenates surfaces (exact inverse of tokenize); word scheme
/// joins them with single spaces.
std::string detokenize(TokenSpan ids, const Vocab& vocab, Scheme scheme);

struct CorpusSplits {
  std::vector<std::vector<TokenId>> train;
  std::vector<std::vector<TokenId>> dev;
  std::vector<std::vector<TokenId>> test;
  std::size_t seq_len = 0;
  std::array<double, 3> ratios{};
};

/// Chunks into consecutive `seq_len` windows (short remainder dropped), then
/// allocates floor(N*r1) to train, floor(N*r2) to dev and the rest to test.
/// Every split receives at least one chunk.
CorpusSplits split_corpus(TokenSpan seq, std::size_t seq_len, std::array<double, 3> ratios);

// --- n-grams ---------------------------------------------------------------

struct NgramHash {
  std::size_t operator()(const std::vector<TokenId>& gram) const noexcept;
};

using NgramCounts = std::unordered_map<std::vector<TokenId>, std::size_t, NgramHash>;

/// All len-n+1 contiguous n-grams with multiplicity. Throws BadOrder for n < 1.
NgramCounts extract_ngrams(TokenSpan seq, int n);

// --- sentences and pairs ---------------------------------------------------

/// Splits after '.', '!' or '?' when followed by whitespace and an uppercase
/// letter, or by end of text. No abbreviation handling.
std::vector<std::string> segment_sentences(std::string_view text);

enum class PairMode { NSP, SOP };
enum class PairLabel { Positive, Negative };

PairMode parse_pair_mode(std::string_view name);

struct SentencePair {
  std::vector<TokenId> first;
  std::vector<TokenId> second;
  PairLabel label = PairLabel::Positive;
  PairMode mode = PairMode::NSP;
};

struct PairExample {
  SentencePair positive;
  SentencePair negative;
};

/// Draws `count` distinct adjacent pairs as positives. NSP negatives replace
/// the second sentence with a random sentence that differs from the true
/// successor; SOP negatives swap the positive's order.
std::vector<PairExample> build_pair_datasets(const std::vector<std::vector<TokenId>>& sentences,
                                             PairMode mode, std::size_t count,
                                             std::uint64_t seed);

// --- TF-IDF ----------------------------------------------------------------

class TfidfTable {
 public:
  TfidfTable(std::size_t doc_len, std::vector<std::unordered_map<TokenId, double>> scores);

  std::size_t doc_len() const noexcept { return doc_len_; }
  std::size_t n_docs() const noexcept { return scores_.size(); }
  /// 0 for tokens absent from the document.
  double score(std::size_t doc, TokenId token) const;

  /// Per-position regression targets for the sequence the table was built
  /// from. Positions in the dropped remainder get NaN.
  std::vector<double> position_targets(TokenSpan seq) const;

 private:
  std::size_t doc_len_;
  std::vector<std::unordered_map<TokenId, double>> scores_;
};

/// tf = count/doc_len, idf = ln(n_docs/df), score = tf*idf over consecutive
/// `doc_len` windows.
TfidfTable tfidf_scores(TokenSpan seq, std::size_t doc_len);

}  // namespace lmeval::corpus
