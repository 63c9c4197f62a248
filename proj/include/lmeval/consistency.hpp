#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/lm.hpp"

namespace lmeval::consistency {

struct NliTriple {
  std::string context;
  std::string entailed;
  std::string contradicting;
};

struct StoryItem {
  std::vector<std::string> opening;  // exactly 4 sentences
  std::string ending_a;
  std::string ending_b;
  char correct = 'a';
};

struct LineError {
  std::size_t line = 0;
  std::string message;
};

template <typename T>
struct LoadResult {
  std::vector<T> records;
  std::vector<LineError> errors;
};

/// True when `sentence` ends in '.', '!' or '?', optionally followed by
/// closing quotes or brackets.
bool ends_with_terminal_punct(std::string_view sentence);

/// TSV `context<TAB>entailed<TAB>contradicting`; `#` lines and blank lines
/// are skipped. Malformed lines are reported, not fatal. Throws EmptyDataset
/// when no valid record remains.
LoadResult<NliTriple> parse_triples(std::string_view text);
/// TSV `s1<TAB>s2<TAB>s3<TAB>s4<TAB>ending_a<TAB>ending_b<TAB>a|b`.
LoadResult<StoryItem> parse_stories(std::string_view text);

LoadResult<NliTriple> load_triples(const std::filesystem::path& path);
LoadResult<StoryItem> load_stories(const std::filesystem::path& path);

/// Context plus two candidate continuations, already encoded. `correct` is
/// the option the model should prefer.
struct SelectionItem {
  std::vector<TokenId> context;
  std::vector<TokenId> correct;
  std::vector<TokenId> wrong;
};

using Encoder = std::function<std::vector<TokenId>(std::string_view)>;

/// Context and option are joined with a single space: the context is encoded
/// as `context + " "` and the option on its own, so the concatenation equals
/// the encoding of the joined text under the word and char schemes.
std::vector<SelectionItem> prepare(const std::vector<NliTriple>& triples, const Encoder& encode);
/// The four opening sentences joined by single spaces form the context.
std::vector<SelectionItem> prepare(const std::vector<StoryItem>& stories, const Encoder& encode);

enum class Pick { Correct, Wrong, Tie };

struct ItemResult {
  double ppl_correct = 0.0;
  double ppl_wrong = 0.0;
  Pick picked = Pick::Tie;
};

struct SelectionResult {
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t ties = 0;
  std::vector<ItemResult> per_item;
};

/// Perplexity of each option over its own tokens, conditioned on the
/// context. The lower-perplexity option is picked; ties count as incorrect.
/// Throws EmptyDataset for no items.
SelectionResult selection_accuracy(const lm::LanguageModel& model,
                                   const std::vector<SelectionItem>& items);

/// Re-derives picks from recorded perplexities.
Pick pick_from(double ppl_correct, double ppl_wrong) noexcept;

std::string_view pick_name(Pick p) noexcept;

}  // namespace lmeval::consistency
