#pragma once

// Deterministic template-sentence corpus used by tests. Names cover every
// capital letter and counts use all digits, so the char vocabulary has
// between 50 and 100 symbols, while the sentence grammar stays simple enough
// for a small model to learn (and to fall into loops under greedy decoding).

#include <string>
#include <vector>

#include "lmeval/rng.hpp"

namespace lmeval::testing {

inline std::string synthetic_corpus(std::size_t sentences, std::uint64_t seed) {
  static const std::vector<std::string> names{
      "Anna", "Boris", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Ivan",
      "Julia", "Karl", "Lena", "Marco", "Nina", "Oscar", "Paula", "Quinn", "Rosa",
      "Sven", "Tara", "Uma", "Victor", "Wanda", "Xavier", "Yara", "Zoe"};
  static const std::vector<std::string> verbs{"bought", "found", "painted", "counted", "sold",
                                              "carried", "washed", "hid"};
  static const std::vector<std::string> objects{"apples", "boats", "lamps", "books", "chairs",
                                                "kites", "jugs", "maps"};
  static const std::vector<std::string> places{"near the river", "in the garden", "at the market",
                                               "by the fence", "on the hill", "under the bridge"};
  static const std::vector<std::string> endings{".", ".", ".", "!", "?"};
  SplitMix64 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[static_cast<std::size_t>(rng.below(v.size()))];
  };
  std::string out;
  for (std::size_t i = 0; i < sentences; ++i) {
    std::string s = pick(names) + " " + pick(verbs) + " " + std::to_string(rng.below(100)) + " " +
                    pick(objects);
    const auto shape = rng.below(4);
    if (shape == 1) s += " " + pick(places);
    if (shape == 2) s += ", and " + pick(names) + " " + pick(verbs) + " " + pick(objects);
    if (shape == 3) s += "; " + pick(names) + " smiled";
    s += pick(endings);
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

}  // namespace lmeval::testing
