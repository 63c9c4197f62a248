#include "lmeval/sample_set.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "lmeval/error.hpp"

namespace lmeval {

using ojson = nlohmann::ordered_json;

std::vector<TokenSpan> SampleSet::continuations() const {
  std::vector<TokenSpan> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.emplace_back(s.continuation);
  return out;
}

SampleSet SampleSet::from_sequences(const std::vector<std::vector<TokenId>>& seqs,
                                    const std::string& id_prefix) {
  SampleSet set;
  set.samples.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    set.samples.push_back(Sample{id_prefix + "-" + std::to_string(i), {}, seqs[i], 0});
  }
  return set;
}

void SampleSet::check_unique_ids() const {
  std::unordered_set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw Error(Errc::InvalidArgument, "duplicate sample id '" + s.id + "'");
  }
}

std::string to_jsonl(const SampleSet& set) {
  std::string out;
  for (const auto& s : set.samples) {
    ojson j;
    j["id"] = s.id;
    j["model"] = set.provenance.model;
    j["strategy"] = set.provenance.strategy;
    j["param"] = set.provenance.param ? ojson(*set.provenance.param) : ojson(nullptr);
    j["seed"] = s.seed;
    j["prefix_ids"] = s.prefix;
    j["continuation_ids"] = s.continuation;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

SampleSet from_jsonl(const std::string& text) {
  SampleSet set;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = ojson::parse(line);
      Sample s;
      s.id = j.at("id").get<std::string>();
      s.seed = j.value("seed", std::uint64_t{0});
      s.prefix = j.value("prefix_ids", std::vector<TokenId>{});
      s.continuation = j.at("continuation_ids").get<std::vector<TokenId>>();
      if (first) {
        set.provenance.model = j.value("model", std::string{});
        set.provenance.strategy = j.value("strategy", std::string{});
        if (j.contains("param") && !j["param"].is_null()) set.provenance.param = j["param"].get<double>();
        first = false;
      }
      set.samples.push_back(std::move(s));
    } catch (const ojson::exception& e) {
      throw Error(Errc::FormatError, "sample line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  set.check_unique_ids();
  return set;
}

void write_jsonl(const std::filesystem::path& path, const SampleSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << to_jsonl(set);
}

SampleSet read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

}  // namespace lmeval
