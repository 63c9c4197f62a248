#include "lmeval/vocab.hpp"

#include "lmeval/error.hpp"

namespace lmeval {

Vocab::Vocab(std::vector<std::string> tokens) {
  tokens_.reserve(tokens.size());
  for (auto& t : tokens) {
    if (index_.count(t)) throw Error(Errc::FormatError, "duplicate vocabulary entry '" + t + "'");
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

Vocab Vocab::numeric(std::size_t n) {
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(std::to_string(i));
  return Vocab(std::move(tokens));
}

TokenId Vocab::add(std::string_view surface) {
  std::string key(surface);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(key, id);
  tokens_.push_back(std::move(key));
  return id;
}

std::optional<TokenId> Vocab::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id_of(std::string_view surface) const {
  if (auto id = find(surface)) return *id;
  throw Error(Errc::UnknownToken, "'" + std::string(surface) + "' is not in the vocabulary");
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw Error(Errc::InvalidArgument, "token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

void check_ids(TokenSpan ids, std::size_t vocab_size) {
  for (TokenId id : ids) {
    if (id >= vocab_size) {
      throw Error(Errc::InvalidArgument, "token id " + std::to_string(id) +
                                             " out of range for vocabulary of size " +
                                             std::to_string(vocab_size));
    }
  }
}

}  // namespace lmeval
