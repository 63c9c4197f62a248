#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmeval {

using TokenId = std::uint32_t;
using TokenSpan = std::span<const TokenId>;

inline constexpr std::string_view kUnkToken = "<unk>";

/// Ordered set of distinct token surfaces. Ids are dense: 0..size()-1.
class Vocab {
 public:
  Vocab() = default;
  /// Throws FormatError if `tokens` contains duplicates.
  explicit Vocab(std::vector<std::string> tokens);

  /// A vocabulary whose surfaces are the decimal ids "0".."n-1"; used for
  /// pre-tokenized corpora that carry only a vocabulary size.
  static Vocab numeric(std::size_t n);

  /// Returns the id of `surface`, appending it if it is new.
  TokenId add(std::string_view surface);

  std::optional<TokenId> find(std::string_view surface) const;
  /// Throws UnknownToken when absent.
  TokenId id_of(std::string_view surface) const;
  const std::string& token(TokenId id) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<TokenId> unk() const { return find(kUnkToken); }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Token ids tied to the vocabulary they index.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::shared_ptr<const Vocab> vocab;

  std::size_t size() const noexcept { return ids.size(); }
  TokenSpan span() const noexcept { return ids; }
};

/// Throws InvalidArgument if any id is out of range for a vocabulary of `vocab_size`.
void check_ids(TokenSpan ids, std::size_t vocab_size);

}  // namespace lmeval
