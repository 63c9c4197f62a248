#include "lmeval/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lmeval/error.hpp"

namespace lmeval::io {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(Errc::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string format_ids(const IdFile& file) {
  std::string out = "#vocab_size=" + std::to_string(file.vocab_size) + "\n";
  for (const auto& seq : file.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out.push_back(' ');
      out += std::to_string(seq[i]);
    }
    out.push_back('\n');
  }
  return out;
}

IdFile parse_ids(const std::string& text) {
  IdFile file;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      constexpr std::string_view kHeader = "#vocab_size=";
      if (line.rfind(kHeader, 0) != 0) throw Error(Errc::FormatError, "id file must start with #vocab_size=N");
      const char* b = line.data() + kHeader.size();
      const char* e = line.data() + line.size();
      auto [ptr, ec] = std::from_chars(b, e, file.vocab_size);
      if (ec != std::errc() || ptr != e || file.vocab_size == 0) {
        throw Error(Errc::FormatError, "bad vocab_size header");
      }
      have_header = true;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<TokenId> seq;
    const char* p = line.data();
    const char* e = line.data() + line.size();
    while (p < e) {
      while (p < e && (*p == ' ' || *p == '\t')) ++p;
      if (p == e) break;
      TokenId id = 0;
      auto [ptr, ec] = std::from_chars(p, e, id);
      if (ec != std::errc() || (ptr < e && *ptr != ' ' && *ptr != '\t')) {
        throw Error(Errc::FormatError, "line " + std::to_string(line_no) + ": malformed token id");
      }
      if (id >= file.vocab_size) {
        throw Error(Errc::FormatError, "line " + std::to_string(line_no) + ": id exceeds vocab_size");
      }
      seq.push_back(id);
      p = ptr;
    }
    file.sequences.push_back(std::move(seq));
  }
  if (!have_header) throw Error(Errc::FormatError, "id file is empty");
  return file;
}

void write_ids(const fs::path& path, const IdFile& file) { write_text(path, format_ids(file)); }
IdFile read_ids(const fs::path& path) { return parse_ids(read_text(path)); }

void write_vocab(const fs::path& path, const Vocab& vocab, corpus::Scheme scheme) {
  ojson j;
  j["scheme"] = corpus::scheme_name(scheme);
  j["tokens"] = vocab.tokens();
  write_text(path, j.dump(1) + "\n");
}

VocabFile read_vocab(const fs::path& path) {
  try {
    const auto j = ojson::parse(read_text(path));
    return VocabFile{Vocab(j.at("tokens").get<std::vector<std::string>>()),
                     corpus::parse_scheme(j.at("scheme").get<std::string>())};
  } catch (const ojson::exception& e) {
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
}

std::string manifest_json(const SplitManifest& m) {
  ojson j;
  j["seq_len"] = m.seq_len;
  j["ratios"] = m.ratios;
  j["counts"] = {{"train", m.counts[0]}, {"dev", m.counts[1]}, {"test", m.counts[2]}};
  j["tokenizer"] = m.tokenizer;
  j["seed"] = m.seed;
  return j.dump(1) + "\n";
}

SplitManifest parse_manifest(const std::string& text) {
  try {
    const auto j = ojson::parse(text);
    SplitManifest m;
    m.seq_len = j.at("seq_len").get<std::size_t>();
    m.ratios = j.at("ratios").get<std::array<double, 3>>();
    const auto& c = j.at("counts");
    m.counts = {c.at("train").get<std::size_t>(), c.at("dev").get<std::size_t>(),
                c.at("test").get<std::size_t>()};
    m.tokenizer = j.at("tokenizer").get<std::string>();
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
  } catch (const ojson::exception& e) {
    throw Error(Errc::FormatError, std::string("manifest: ") + e.what());
  }
}

std::vector<std::vector<losses::WordLabel>> parse_label_file(const std::string& text,
                                                             LabelColumn column) {
  std::vector<std::vector<losses::WordLabel>> sentences(1);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!sentences.back().empty()) sentences.emplace_back();
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      throw Error(Errc::FormatError, "label file line " + std::to_string(line_no) +
                                         ": expected surface<TAB>label[<TAB>head_offset]");
    }
    std::string label = column == LabelColumn::Tag ? fields[1] : (fields.size() == 3 ? fields[2] : "");
    sentences.back().push_back({fields[0], std::move(label)});
  }
  if (sentences.back().empty()) sentences.pop_back();
  if (sentences.empty()) throw Error(Errc::EmptyDataset, "label file has no sentences");
  return sentences;
}

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::uint64_t u64() {
    if (pos_ + 8 > bytes_.size()) throw Error(Errc::FormatError, "model payload truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

}  // namespace

std::string serialize_model(const lm::LanguageModel& model, const Vocab* vocab,
                            corpus::Scheme scheme, const std::vector<std::string>& labels) {
  ojson header;
  header["backend"] = model.backend();
  header["vocab_size"] = model.vocab_size();
  std::string payload;
  if (const auto* ffn = dynamic_cast<const lm::FeedForwardLM*>(&model)) {
    const auto& d = ffn->dims();
    header["dims"] = {{"context", d.context},          {"embed", d.embed},
                      {"hidden", d.hidden},            {"regression_head", d.regression_head},
                      {"n_labels", d.n_labels}};
    header["n_params"] = ffn->param_count();
    payload.reserve(ffn->param_count() * 8);
    for (double v : ffn->params()) put_u64(payload, std::bit_cast<std::uint64_t>(v));
  } else if (const auto* ng = dynamic_cast<const lm::NGramLM*>(&model)) {
    header["dims"] = {{"order", ng->order()}, {"k_s", ng->smoothing()}};
    std::vector<const std::vector<TokenId>*> keys;
    keys.reserve(ng->table().size());
    for (const auto& [ctx, stats] : ng->table()) keys.push_back(&ctx);
    std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) {
      if (a->size() != b->size()) return a->size() < b->size();
      return *a < *b;
    });
    header["n_contexts"] = keys.size();
    for (const auto* key : keys) {
      const auto& stats = ng->table().at(*key);
      put_u64(payload, key->size());
      for (TokenId id : *key) put_u64(payload, id);
      put_u64(payload, stats.total);
      std::vector<std::pair<TokenId, std::uint64_t>> next(stats.next.begin(), stats.next.end());
      std::sort(next.begin(), next.end());
      put_u64(payload, next.size());
      for (const auto& [id, count] : next) {
        put_u64(payload, id);
        put_u64(payload, count);
      }
    }
  } else {
    throw Error(Errc::InvalidArgument, "backend '" + model.backend() + "' cannot be serialized");
  }
  header["scheme"] = corpus::scheme_name(scheme);
  header["vocab"] = vocab ? ojson(vocab->tokens()) : ojson(nullptr);
  if (!labels.empty()) header["labels"] = labels;

  const std::string head = header.dump();
  std::string out(kModelMagic, 5);
  put_u64(out, head.size());
  out += head;
  out += payload;
  return out;
}

ModelBundle deserialize_model(const std::string& bytes) {
  if (bytes.size() < 13 || bytes.compare(0, 5, kModelMagic) != 0) {
    throw Error(Errc::FormatError, "not an LMEK1 model file");
  }
  Reader len_reader(bytes, 5);
  const std::uint64_t head_len = len_reader.u64();
  if (13 + head_len > bytes.size()) throw Error(Errc::FormatError, "model header truncated");
  ojson header;
  try {
    header = ojson::parse(bytes.substr(13, head_len));
  } catch (const ojson::exception& e) {
    throw Error(Errc::FormatError, std::string("model header: ") + e.what());
  }
  Reader r(bytes, 13 + head_len);

  ModelBundle bundle;
  try {
    const auto backend = header.at("backend").get<std::string>();
    const auto vocab_size = header.at("vocab_size").get<std::size_t>();
    const auto& dims = header.at("dims");
    if (backend == "ffn") {
      lm::FfnDims d;
      d.vocab_size = vocab_size;
      d.context = dims.at("context").get<std::size_t>();
      d.embed = dims.at("embed").get<std::size_t>();
      d.hidden = dims.at("hidden").get<std::size_t>();
      d.regression_head = dims.at("regression_head").get<bool>();
      d.n_labels = dims.at("n_labels").get<std::size_t>();
      const auto n = header.at("n_params").get<std::size_t>();
      std::vector<double> params(n);
      for (auto& v : params) v = r.f64();
      bundle.model = std::make_unique<lm::FeedForwardLM>(d, std::move(params));
    } else if (backend == "ngram") {
      const int order = dims.at("order").get<int>();
      const double k_s = dims.at("k_s").get<double>();
      const auto n_ctx = header.at("n_contexts").get<std::size_t>();
      lm::NGramLM::Table table;
      for (std::size_t c = 0; c < n_ctx; ++c) {
        std::vector<TokenId> key(r.u64());
        for (auto& id : key) id = static_cast<TokenId>(r.u64());
        lm::NGramLM::ContextStats stats;
        stats.total = r.u64();
        const auto n_next = r.u64();
        for (std::uint64_t i = 0; i < n_next; ++i) {
          const auto id = static_cast<TokenId>(r.u64());
          stats.next[id] = r.u64();
        }
        table.emplace(std::move(key), std::move(stats));
      }
      bundle.model = std::make_unique<lm::NGramLM>(vocab_size, order, k_s, std::move(table));
    } else {
      throw Error(Errc::FormatError, "unknown backend '" + backend + "'");
    }
    bundle.scheme = corpus::parse_scheme(header.value("scheme", std::string("word")));
    if (header.contains("vocab") && !header["vocab"].is_null()) {
      auto vocab = std::make_shared<Vocab>(header["vocab"].get<std::vector<std::string>>());
      if (vocab->size() != vocab_size) throw Error(Errc::FormatError, "vocab list does not match vocab_size");
      bundle.vocab = std::move(vocab);
    }
    if (header.contains("labels")) bundle.labels = header["labels"].get<std::vector<std::string>>();
  } catch (const ojson::exception& e) {
    throw Error(Errc::FormatError, std::string("model header: ") + e.what());
  }
  if (!r.done()) throw Error(Errc::FormatError, "trailing bytes after model payload");
  return bundle;
}

void save_model(const fs::path& path, const lm::LanguageModel& model, const Vocab* vocab,
                corpus::Scheme scheme, const std::vector<std::string>& labels) {
  write_text(path, serialize_model(model, vocab, scheme, labels));
}

ModelBundle load_model(const fs::path& path) { return deserialize_model(read_text(path)); }

}  // namespace lmeval::io
