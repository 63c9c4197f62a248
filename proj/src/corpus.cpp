#include "lmeval/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmeval/error.hpp"
#include "lmeval/rng.hpp"
#include "utf8.hpp"

namespace lmeval::corpus {

namespace {

// Drops a leading byte-order mark and folds CRLF/CR line endings to LF.
std::u32string normalize(std::string_view text) {
  std::u32string cps = utf8::decode(text);
  std::u32string out;
  out.reserve(cps.size());
  std::size_t i = (!cps.empty() && cps[0] == 0xFEFF) ? 1 : 0;
  for (; i < cps.size(); ++i) {
    if (cps[i] == U'\r') {
      out.push_back(U'\n');
      if (i + 1 < cps.size() && cps[i + 1] == U'\n') ++i;
    } else {
      out.push_back(cps[i]);
    }
  }
  return out;
}

}  // namespace

Scheme parse_scheme(std::string_view name) {
  if (name == "word") return Scheme::Word;
  if (name == "char") return Scheme::Char;
  throw Error(Errc::ConfigError, "unknown tokenizer scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(Scheme scheme) noexcept {
  return scheme == Scheme::Word ? "word" : "char";
}

std::vector<std::string> split_tokens(std::string_view text, Scheme scheme) {
  const std::u32string cps = normalize(text);
  std::vector<std::string> out;
  if (scheme == Scheme::Char) {
    out.reserve(cps.size());
    for (char32_t cp : cps) out.push_back(utf8::encode(cp));
    return out;
  }
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char32_t cp : cps) {
    if (utf8::is_space(cp)) {
      flush();
    } else if (utf8::is_punct(cp)) {
      flush();
      out.push_back(utf8::encode(cp));
    } else {
      utf8::append(current, cp);
    }
  }
  flush();
  return out;
}

TokenSequence tokenize(std::string_view text, Scheme scheme) {
  auto surfaces = split_tokens(text, scheme);
  if (surfaces.empty()) throw Error(Errc::EmptyInput, "no tokens after normalization");
  auto vocab = std::make_shared<Vocab>();
  TokenSequence seq;
  seq.ids.reserve(surfaces.size());
  for (const auto& s : surfaces) seq.ids.push_back(vocab->add(s));
  seq.vocab = std::move(vocab);
  return seq;
}

std::vector<TokenId> encode(std::string_view text, Scheme scheme, const Vocab& vocab) {
  const auto unk = vocab.unk();
  std::vector<TokenId> ids;
  for (const auto& s : split_tokens(text, scheme)) {
    if (auto id = vocab.find(s)) {
      ids.push_back(*id);
    } else if (unk) {
      ids.push_back(*unk);
    } else {
      throw Error(Errc::UnknownToken, "'" + s + "' is not in the vocabulary");
    }
  }
  return ids;
}

std::string detokenize(TokenSpan ids, const Vocab& vocab, Scheme scheme) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (scheme == Scheme::Word && i > 0) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

CorpusSplits split_corpus(TokenSpan seq, std::size_t seq_len, std::array<double, 3> ratios) {
  if (seq_len < 2) throw Error(Errc::ConfigError, "seq_len must be >= 2");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(Errc::ConfigError, "split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::ConfigError, "split ratios must sum to 1");

  const std::size_t n_chunks = seq.size() / seq_len;
  if (n_chunks < 3) {
    throw Error(Errc::CorpusTooSmall, "corpus yields " + std::to_string(n_chunks) +
                                          " chunks of " + std::to_string(seq_len) + " tokens; need 3");
  }
  // The epsilon keeps products such as 0.29 * 100 = 28.999999999999996 on
  // the intended integer.
  auto floor_share = [&](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n_chunks) * r + 1e-9));
  };
  std::size_t n_train = std::max<std::size_t>(1, floor_share(ratios[0]));
  std::size_t n_dev = std::max<std::size_t>(1, floor_share(ratios[1]));
  while (n_train + n_dev > n_chunks - 1) {
    if (n_dev > n_train) --n_dev;
    else --n_train;
  }

  CorpusSplits splits;
  splits.seq_len = seq_len;
  splits.ratios = ratios;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    std::vector<TokenId> chunk(seq.begin() + static_cast<std::ptrdiff_t>(c * seq_len),
                               seq.begin() + static_cast<std::ptrdiff_t>((c + 1) * seq_len));
    if (c < n_train) splits.train.push_back(std::move(chunk));
    else if (c < n_train + n_dev) splits.dev.push_back(std::move(chunk));
    else splits.test.push_back(std::move(chunk));
  }
  return splits;
}

std::size_t NgramHash::operator()(const std::vector<TokenId>& gram) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (TokenId id : gram) {
    h ^= id;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h ^ (h >> 29));
}

NgramCounts extract_ngrams(TokenSpan seq, int n) {
  if (n < 1) throw Error(Errc::BadOrder, "n-gram order must be >= 1, got " + std::to_string(n));
  NgramCounts counts;
  const auto order = static_cast<std::size_t>(n);
  if (seq.size() < order) return counts;
  for (std::size_t i = 0; i + order <= seq.size(); ++i) {
    ++counts[std::vector<TokenId>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                  seq.begin() + static_cast<std::ptrdiff_t>(i + order))];
  }
  return counts;
}

std::vector<std::string> segment_sentences(std::string_view text) {
  const std::u32string cps = normalize(text);
  std::vector<std::string> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && utf8::is_space(cps[begin])) ++begin;
    while (end > begin && utf8::is_space(cps[end - 1])) --end;
    if (begin == end) return;
    std::string s;
    for (std::size_t i = begin; i < end; ++i) utf8::append(s, cps[i]);
    out.push_back(std::move(s));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (c != U'.' && c != U'!' && c != U'?') continue;
    std::size_t j = i + 1;
    bool boundary = false;
    if (j == cps.size()) {
      boundary = true;
    } else if (utf8::is_space(cps[j])) {
      while (j < cps.size() && utf8::is_space(cps[j])) ++j;
      boundary = (j == cps.size()) || utf8::is_upper(cps[j]);
    }
    if (boundary) {
      emit(start, i + 1);
      start = i + 1;
    }
  }
  emit(start, cps.size());
  return out;
}

PairMode parse_pair_mode(std::string_view name) {
  if (name == "nsp" || name == "NSP") return PairMode::NSP;
  if (name == "sop" || name == "SOP") return PairMode::SOP;
  throw Error(Errc::ConfigError, "unknown pair mode '" + std::string(name) + "'");
}

std::vector<PairExample> build_pair_datasets(const std::vector<std::vector<TokenId>>& sentences,
                                             PairMode mode, std::size_t count,
                                             std::uint64_t seed) {
  if (sentences.size() < 3) {
    throw Error(Errc::InsufficientData, "pair construction needs at least 3 sentences");
  }
  const std::size_t n_adjacent = sentences.size() - 1;
  if (count > n_adjacent) {
    throw Error(Errc::InsufficientData, "requested " + std::to_string(count) + " pairs but only " +
                                            std::to_string(n_adjacent) + " adjacent pairs exist");
  }

  SplitMix64 rng(seed);
  // Partial Fisher-Yates over start indices; chosen starts are then restored
  // to source order.
  std::vector<std::size_t> starts(n_adjacent);
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_adjacent - i));
    std::swap(starts[i], starts[j]);
  }
  starts.resize(count);
  std::sort(starts.begin(), starts.end());

  std::vector<PairExample> out;
  out.reserve(count);
  for (std::size_t s : starts) {
    PairExample ex;
    ex.positive = {sentences[s], sentences[s + 1], PairLabel::Positive, mode};
    if (mode == PairMode::SOP) {
      ex.negative = {sentences[s + 1], sentences[s], PairLabel::Negative, mode};
    } else {
      const auto& successor = sentences[s + 1];
      std::size_t pick = sentences.size();
      for (int attempt = 0; attempt < 64 && pick == sentences.size(); ++attempt) {
        const auto j = static_cast<std::size_t>(rng.below(sentences.size()));
        if (j != s + 1 && sentences[j] != successor) pick = j;
      }
      if (pick == sentences.size()) {
        // Rejection kept hitting the successor; fall back to a seeded scan.
        const auto offset = static_cast<std::size_t>(rng.below(sentences.size()));
        for (std::size_t k = 0; k < sentences.size(); ++k) {
          const std::size_t j = (offset + k) % sentences.size();
          if (j != s + 1 && sentences[j] != successor) {
            pick = j;
            break;
          }
        }
      }
      if (pick == sentences.size()) {
        throw Error(Errc::InsufficientData, "every sentence equals the true successor; no NSP negative exists");
      }
      ex.negative = {sentences[s], sentences[pick], PairLabel::Negative, mode};
    }
    out.push_back(std::move(ex));
  }
  return out;
}

TfidfTable::TfidfTable(std::size_t doc_len, std::vector<std::unordered_map<TokenId, double>> scores)
    : doc_len_(doc_len), scores_(std::move(scores)) {}

double TfidfTable::score(std::size_t doc, TokenId token) const {
  if (doc >= scores_.size()) throw Error(Errc::InvalidArgument, "document index out of range");
  auto it = scores_[doc].find(token);
  return it == scores_[doc].end() ? 0.0 : it->second;
}

std::vector<double> TfidfTable::position_targets(TokenSpan seq) const {
  std::vector<double> out(seq.size(), std::numeric_limits<double>::quiet_NaN());
  const std::size_t covered = std::min(seq.size(), doc_len_ * scores_.size());
  for (std::size_t i = 0; i < covered; ++i) out[i] = score(i / doc_len_, seq[i]);
  return out;
}

TfidfTable tfidf_scores(TokenSpan seq, std::size_t doc_len) {
  if (doc_len < 1) throw Error(Errc::ConfigError, "doc_len must be >= 1");
  if (seq.size() < doc_len) {
    throw Error(Errc::CorpusTooSmall, "sequence shorter than one TF-IDF document");
  }
  const std::size_t n_docs = seq.size() / doc_len;
  std::vector<std::unordered_map<TokenId, std::size_t>> tf(n_docs);
  std::unordered_map<TokenId, std::size_t> df;
  for (std::size_t d = 0; d < n_docs; ++d) {
    for (std::size_t i = d * doc_len; i < (d + 1) * doc_len; ++i) {
      if (tf[d][seq[i]]++ == 0) ++df[seq[i]];
    }
  }
  std::vector<std::unordered_map<TokenId, double>> scores(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    for (const auto& [token, count] : tf[d]) {
      const double idf = std::log(static_cast<double>(n_docs) / static_cast<double>(df[token]));
      scores[d][token] = (static_cast<double>(count) / static_cast<double>(doc_len)) * idf;
    }
  }
  return TfidfTable(doc_len, std::move(scores));
}

}  // namespace lmeval::corpus
