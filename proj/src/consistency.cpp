#include "lmeval/consistency.hpp"

#include "lmeval/error.hpp"
#include "lmeval/io.hpp"

namespace lmeval::consistency {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T, typename ParseLine>
LoadResult<T> parse_lines(std::string_view text, ParseLine parse_line) {
  LoadResult<T> result;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    try {
      result.records.push_back(parse_line(split_tabs(line)));
    } catch (const Error& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  if (result.records.empty()) {
    throw Error(Errc::EmptyDataset, "no valid records (" + std::to_string(result.errors.size()) +
                                        " malformed lines)");
  }
  return result;
}

std::string require_text(std::string_view field, const char* name) {
  const auto t = trim(field);
  if (t.empty()) throw Error(Errc::FormatError, std::string(name) + " is empty");
  return std::string(t);
}

}  // namespace

bool ends_with_terminal_punct(std::string_view s) {
  s = trim(s);
  while (!s.empty()) {
    const unsigned char c = static_cast<unsigned char>(s.back());
    if (c == '"' || c == '\'' || c == ')' || c == ']') {
      s.remove_suffix(1);
      continue;
    }
    // U+201D and U+2019 closing quotes
    if (s.size() >= 3 && (s.substr(s.size() - 3) == "\xE2\x80\x9D" || s.substr(s.size() - 3) == "\xE2\x80\x99")) {
      s.remove_suffix(3);
      continue;
    }
    break;
  }
  if (s.empty()) return false;
  const char last = s.back();
  return last == '.' || last == '!' || last == '?';
}

LoadResult<NliTriple> parse_triples(std::string_view text) {
  return parse_lines<NliTriple>(text, [](const std::vector<std::string_view>& f) {
    if (f.size() != 3) throw Error(Errc::FormatError, "expected 3 fields, got " + std::to_string(f.size()));
    NliTriple t{require_text(f[0], "context"), require_text(f[1], "entailed"),
                require_text(f[2], "contradicting")};
    if (!ends_with_terminal_punct(t.context)) {
      throw Error(Errc::FormatError, "context does not end with terminal punctuation");
    }
    return t;
  });
}

LoadResult<StoryItem> parse_stories(std::string_view text) {
  return parse_lines<StoryItem>(text, [](const std::vector<std::string_view>& f) {
    if (f.size() != 7) throw Error(Errc::FormatError, "expected 7 fields, got " + std::to_string(f.size()));
    StoryItem s;
    for (int i = 0; i < 4; ++i) s.opening.push_back(require_text(f[static_cast<std::size_t>(i)], "opening sentence"));
    s.ending_a = require_text(f[4], "ending_a");
    s.ending_b = require_text(f[5], "ending_b");
    const auto c = trim(f[6]);
    if (c != "a" && c != "b") throw Error(Errc::FormatError, "correct must be 'a' or 'b'");
    s.correct = c[0];
    if (!ends_with_terminal_punct(s.opening.back())) {
      throw Error(Errc::FormatError, "context does not end with terminal punctuation");
    }
    return s;
  });
}

LoadResult<NliTriple> load_triples(const std::filesystem::path& path) {
  return parse_triples(io::read_text(path));
}

LoadResult<StoryItem> load_stories(const std::filesystem::path& path) {
  return parse_stories(io::read_text(path));
}

std::vector<SelectionItem> prepare(const std::vector<NliTriple>& triples, const Encoder& encode) {
  std::vector<SelectionItem> items;
  items.reserve(triples.size());
  for (const auto& t : triples) {
    items.push_back({encode(t.context + " "), encode(t.entailed), encode(t.contradicting)});
  }
  return items;
}

std::vector<SelectionItem> prepare(const std::vector<StoryItem>& stories, const Encoder& encode) {
  std::vector<SelectionItem> items;
  items.reserve(stories.size());
  for (const auto& s : stories) {
    std::string ctx;
    for (const auto& sentence : s.opening) ctx += sentence + " ";
    const auto& right = s.correct == 'a' ? s.ending_a : s.ending_b;
    const auto& wrong = s.correct == 'a' ? s.ending_b : s.ending_a;
    items.push_back({encode(ctx), encode(right), encode(wrong)});
  }
  return items;
}

Pick pick_from(double ppl_correct, double ppl_wrong) noexcept {
  if (ppl_correct < ppl_wrong) return Pick::Correct;
  if (ppl_wrong < ppl_correct) return Pick::Wrong;
  return Pick::Tie;
}

std::string_view pick_name(Pick p) noexcept {
  switch (p) {
    case Pick::Correct: return "correct";
    case Pick::Wrong: return "wrong";
    case Pick::Tie: return "tie";
  }
  return "tie";
}

SelectionResult selection_accuracy(const lm::LanguageModel& model,
                                   const std::vector<SelectionItem>& items) {
  if (items.empty()) throw Error(Errc::EmptyDataset, "no items to score");
  SelectionResult r;
  r.n = items.size();
  r.per_item.reserve(items.size());
  std::size_t correct = 0;
  for (const auto& item : items) {
    ItemResult ir;
    ir.ppl_correct = lm::perplexity(model, item.correct, item.context);
    ir.ppl_wrong = lm::perplexity(model, item.wrong, item.context);
    ir.picked = pick_from(ir.ppl_correct, ir.ppl_wrong);
    if (ir.picked == Pick::Correct) ++correct;
    if (ir.picked == Pick::Tie) ++r.ties;
    r.per_item.push_back(ir);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  return r;
}

}  // namespace lmeval::consistency
