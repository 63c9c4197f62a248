// Command-line front end: ingest, train, generate, eval, sweep, fit, trace,
// nli, story and serve. Every flag overrides the matching key of the JSON
// config file. Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmeval/adapter.hpp"
#include "lmeval/consistency.hpp"
#include "lmeval/corpus.hpp"
#include "lmeval/decode.hpp"
#include "lmeval/error.hpp"
#include "lmeval/ffn.hpp"
#include "lmeval/harness.hpp"
#include "lmeval/io.hpp"
#include "lmeval/lm.hpp"
#include "lmeval/losses.hpp"
#include "lmeval/metrics.hpp"
#include "lmeval/sample_set.hpp"
#include "lmeval/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lmeval;

namespace {

// Collects a subcommand's flags and overlays the ones given on the command
// line onto that subcommand's config section.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {}

  template <typename T>
  Flags& opt(const std::string& name, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* o = app_->add_option(name, *value, help);
    if constexpr (std::is_same_v<T, std::vector<std::string>> || std::is_same_v<T, std::vector<double>>) {
      o->delimiter(',');
    }
    setters_.push_back([o, value, key](json& j) {
      if (o->count() > 0) j[key] = *value;
    });
    return *this;
  }

  json merge(const json& section) const {
    json j = section.is_object() ? section : json::object();
    for (const auto& set : setters_) set(j);
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> setters_;
};

struct Globals {
  json config = json::object();
  std::uint64_t seed = 0;
  fs::path out_dir = ".";
  std::size_t workers = 1;
};

template <typename T>
T get(const json& s, const std::string& key, T fallback) {
  if (!s.contains(key) || s[key].is_null()) return fallback;
  try {
    return s[key].get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "'" + key + "': " + e.what());
  }
}

template <typename T>
std::optional<T> get_opt(const json& s, const std::string& key) {
  if (!s.contains(key) || s[key].is_null()) return std::nullopt;
  return get<T>(s, key, T{});
}

template <typename T>
T need(const json& s, const std::string& key) {
  if (!s.contains(key) || s[key].is_null()) throw Error(Errc::ConfigError, "missing required setting '" + key + "'");
  return get<T>(s, key, T{});
}

fs::path path_or(const json& s, const std::string& key, const fs::path& fallback) {
  const auto p = get<std::string>(s, key, "");
  return p.empty() ? fallback : fs::path(p);
}

void print(const json& j) { std::cout << j.dump(1) << std::endl; }

std::optional<io::VocabFile> maybe_vocab(const json& s, const Globals& g) {
  const fs::path p = path_or(s, "vocab", g.out_dir / "vocab.json");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    if (s.contains("vocab")) throw Error(Errc::IoError, "vocabulary file not found: " + p.string());
    return std::nullopt;
  }
  return io::read_vocab(p);
}

struct TextCodec {
  std::shared_ptr<const Vocab> vocab;
  corpus::Scheme scheme = corpus::Scheme::Word;

  std::vector<TokenId> encode(std::string_view text) const {
    return corpus::encode(text, scheme, *vocab);
  }
};

TextCodec codec_for(const io::ModelBundle& bundle, const json& s, const Globals& g) {
  if (bundle.vocab) return {bundle.vocab, bundle.scheme};
  if (auto vf = maybe_vocab(s, g)) {
    return {std::make_shared<const Vocab>(std::move(vf->vocab)), vf->scheme};
  }
  throw Error(Errc::ConfigError, "text input needs a vocabulary (model has none; pass --vocab)");
}

std::vector<TokenId> parse_id_text(const std::string& text) {
  std::vector<TokenId> ids;
  std::istringstream in(text);
  long long v = 0;
  while (in >> v) {
    if (v < 0) throw Error(Errc::FormatError, "negative token id");
    ids.push_back(static_cast<TokenId>(v));
  }
  if (!in.eof()) throw Error(Errc::FormatError, "malformed id list '" + text + "'");
  return ids;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const json& s, const Globals& g) {
  const auto scheme = corpus::parse_scheme(get<std::string>(s, "scheme", "word"));
  const auto seq_len = get<std::size_t>(s, "seq_len", 64);
  const auto ratios_v = get<std::vector<double>>(s, "ratios", {0.8, 0.1, 0.1});
  if (ratios_v.size() != 3) throw Error(Errc::ConfigError, "ratios needs exactly 3 values");
  const std::array<double, 3> ratios{ratios_v[0], ratios_v[1], ratios_v[2]};
  const auto input = get<std::string>(s, "input", "");
  const auto ids_in = get<std::string>(s, "ids", "");
  if (input.empty() == ids_in.empty()) throw Error(Errc::ConfigError, "give exactly one of --input or --ids");

  std::vector<TokenId> stream;
  std::size_t vocab_size = 0;
  std::string tokenizer;
  if (!input.empty()) {
    auto seq = corpus::tokenize(io::read_text(input), scheme);
    Vocab vocab = *seq.vocab;
    if (!vocab.unk()) vocab.add(kUnkToken);
    io::write_vocab(g.out_dir / "vocab.json", vocab, scheme);
    stream = std::move(seq.ids);
    vocab_size = vocab.size();
    tokenizer = std::string(corpus::scheme_name(scheme));
  } else {
    const auto file = io::read_ids(ids_in);
    for (const auto& seq : file.sequences) stream.insert(stream.end(), seq.begin(), seq.end());
    vocab_size = file.vocab_size;
    tokenizer = "ids";
  }
  const auto splits = corpus::split_corpus(stream, seq_len, ratios);
  io::write_ids(g.out_dir / "train.ids", {vocab_size, splits.train});
  io::write_ids(g.out_dir / "dev.ids", {vocab_size, splits.dev});
  io::write_ids(g.out_dir / "test.ids", {vocab_size, splits.test});
  io::SplitManifest m{seq_len, ratios, {splits.train.size(), splits.dev.size(), splits.test.size()},
                      tokenizer, g.seed};
  io::write_text(g.out_dir / "manifest.json", io::manifest_json(m));
  print({{"tokens", stream.size()},
         {"vocab_size", vocab_size},
         {"train", splits.train.size()},
         {"dev", splits.dev.size()},
         {"test", splits.test.size()}});
  return 0;
}

losses::TrainConfig train_config(const json& s, std::uint64_t seed) {
  losses::TrainConfig cfg;
  cfg.epochs = get<int>(s, "epochs", cfg.epochs);
  cfg.batch_size = get<std::size_t>(s, "batch_size", cfg.batch_size);
  cfg.learning_rate = get<double>(s, "lr", cfg.learning_rate);
  cfg.seq_ul.mix_prob = get<double>(s, "ul_mix", cfg.seq_ul.mix_prob);
  cfg.seq_ul.prefix_len = get<std::size_t>(s, "ul_prefix", cfg.seq_ul.prefix_len);
  cfg.seq_ul.gen_len = get<std::size_t>(s, "ul_gen", cfg.seq_ul.gen_len);
  cfg.seq_ul.ngram = get<int>(s, "ul_ngram", cfg.seq_ul.ngram);
  cfg.margin = get<double>(s, "margin", cfg.margin);
  cfg.seed = seed;
  if (s.contains("objectives")) {
    cfg.objectives.clear();
    for (const auto& spec : get<std::vector<std::string>>(s, "objectives", {})) {
      const auto colon = spec.find(':');
      const auto kind = losses::parse_objective(spec.substr(0, colon));
      double w = 1.0;
      if (colon != std::string::npos) {
        try {
          std::size_t used = 0;
          w = std::stod(spec.substr(colon + 1), &used);
          if (used != spec.size() - colon - 1) throw std::invalid_argument(spec);
        } catch (const std::logic_error&) {
          throw Error(Errc::ConfigError, "bad objective weight in '" + spec + "'");
        }
      }
      cfg.objectives.emplace_back(kind, w);
    }
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const json& s, const Globals& g) {
  const auto backend = get<std::string>(s, "backend", "ffn");
  const auto train_file = io::read_ids(path_or(s, "train", g.out_dir / "train.ids"));
  const auto vf = maybe_vocab(s, g);
  if (vf && vf->vocab.size() != train_file.vocab_size) {
    throw Error(Errc::ConfigError, "vocabulary size does not match the id file");
  }
  const Vocab* vocab = vf ? &vf->vocab : nullptr;
  const auto scheme = vf ? vf->scheme : corpus::Scheme::Word;
  const fs::path model_out = path_or(s, "model_out", g.out_dir / "model.lmek");
  const std::size_t V = train_file.vocab_size;

  if (backend == "ngram") {
    const auto model = lm::NGramLM::fit(train_file.sequences, V, get<int>(s, "order", 3),
                                        get<double>(s, "k_s", 1.0));
    io::save_model(model_out, model, vocab, scheme);
    print({{"backend", "ngram"}, {"model", model_out.string()}, {"contexts", model.table().size()}});
    return 0;
  }
  if (backend != "ffn") throw Error(Errc::ConfigError, "unknown backend '" + backend + "'");

  const auto cfg = train_config(s, g.seed);
  losses::TrainData data;
  for (const auto& seq : train_file.sequences) data.items.push_back({seq, {}, {}});

  if (cfg.weight(losses::Objective::Tfidf) > 0.0) {
    const auto doc_len = get<std::size_t>(s, "tfidf_doc_len", 64);
    std::vector<TokenId> stream;
    for (const auto& seq : train_file.sequences) stream.insert(stream.end(), seq.begin(), seq.end());
    const auto targets = corpus::tfidf_scores(stream, doc_len).position_targets(stream);
    std::size_t offset = 0;
    for (auto& item : data.items) {
      item.tfidf.assign(targets.begin() + static_cast<std::ptrdiff_t>(offset),
                        targets.begin() + static_cast<std::ptrdiff_t>(offset + item.tokens.size()));
      offset += item.tokens.size();
    }
  }

  losses::LabelSet labels;
  if (cfg.weight(losses::Objective::Classify) > 0.0) {
    if (!vocab) throw Error(Errc::ConfigError, "classification needs a vocabulary");
    const auto column = get<std::string>(s, "label_column", "tag");
    if (column != "tag" && column != "head") throw Error(Errc::ConfigError, "label_column must be tag or head");
    const auto sentences = io::parse_label_file(io::read_text(need<std::string>(s, "labels")),
                                                column == "tag" ? io::LabelColumn::Tag : io::LabelColumn::Head);
    for (const auto& words : sentences) {
      std::string text;
      for (const auto& w : words) text += (text.empty() ? "" : " ") + w.surface;
      const auto surfaces = corpus::split_tokens(text, scheme);
      losses::TrainItem item;
      item.tokens = corpus::encode(text, scheme, *vocab);
      item.labels = losses::align_labels(words, surfaces, labels);
      data.items.push_back(std::move(item));
    }
  }

  if (cfg.weight(losses::Objective::MarginRank) > 0.0) {
    if (!vocab) throw Error(Errc::ConfigError, "pair construction needs a vocabulary");
    std::vector<std::vector<TokenId>> sentences;
    for (const auto& sent : corpus::segment_sentences(io::read_text(need<std::string>(s, "pairs_text")))) {
      auto ids = corpus::encode(sent, scheme, *vocab);
      if (!ids.empty()) sentences.push_back(std::move(ids));
    }
    data.pairs = corpus::build_pair_datasets(sentences, corpus::parse_pair_mode(get<std::string>(s, "pair_mode", "nsp")),
                                             get<std::size_t>(s, "pair_count", 100), g.seed);
  }

  lm::FfnDims dims;
  dims.vocab_size = V;
  dims.context = get<std::size_t>(s, "context", dims.context);
  dims.embed = get<std::size_t>(s, "embed", dims.embed);
  dims.hidden = get<std::size_t>(s, "hidden", dims.hidden);
  dims.regression_head = cfg.weight(losses::Objective::Tfidf) > 0.0;
  dims.n_labels = cfg.weight(losses::Objective::Classify) > 0.0 ? labels.size() : 0;
  auto model = lm::FeedForwardLM::init(dims, g.seed);

  std::string log;
  losses::train(model, data, cfg, [&](int epoch, std::size_t step, const losses::StepReport& r) {
    json line;
    line["epoch"] = epoch;
    line["step"] = step;
    line["total"] = r.total;
    json parts = json::object();
    for (const auto& [kind, value] : r.losses) parts[std::string(losses::objective_name(kind))] = value;
    line["losses"] = parts;
    line["sequence_level"] = r.sequence_level;
    log += line.dump() + "\n";
  });
  io::write_text(path_or(s, "log", g.out_dir / "train_log.jsonl"), log);
  std::vector<std::string> label_names;
  if (dims.n_labels > 0) label_names = labels.names();
  io::save_model(model_out, model, vocab, scheme, label_names);
  print({{"backend", "ffn"}, {"model", model_out.string()}, {"params", model.param_count()},
         {"items", data.items.size()}, {"pairs", data.pairs.size()}});
  return 0;
}

decode::DecoderConfig decoder_config(const json& s, std::uint64_t seed) {
  decode::DecoderConfig dc;
  dc.strategy = decode::parse_strategy(get<std::string>(s, "strategy", "greedy"));
  dc.b = get_opt<int>(s, "b");
  dc.t = get_opt<double>(s, "t");
  dc.k = get_opt<int>(s, "k");
  dc.p = get_opt<double>(s, "p");
  dc.theta = get_opt<double>(s, "theta");
  dc.seed = seed;
  dc.max_len = get<std::size_t>(s, "gen_len", 150);
  return dc;
}

int cmd_generate(const json& s, const Globals& g) {
  const auto spec = need<std::string>(s, "model");
  const auto bundle = lm::open_model(spec);
  const auto prefixes_file = io::read_ids(path_or(s, "prefixes", g.out_dir / "test.ids"));
  const auto prefix_len = get<std::size_t>(s, "prefix_len", 50);
  const auto max_prefixes = get_opt<std::size_t>(s, "max_prefixes");
  if (prefix_len < 1) throw Error(Errc::ConfigError, "prefix_len must be >= 1");
  auto dc = decoder_config(s, g.seed);
  dc.validate(bundle.model->vocab_size());

  harness::Cell cell{0, spec, dc.strategy, dc.param()};
  SampleSet set;
  set.provenance = {spec, std::string(decode::strategy_name(dc.strategy)), dc.param(), g.seed};
  for (const auto& seq : prefixes_file.sequences) {
    if (max_prefixes && set.size() >= *max_prefixes) break;
    if (seq.size() < prefix_len) continue;
    const std::size_t i = set.size();
    std::vector<TokenId> prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(prefix_len));
    auto run = dc;
    run.seed = harness::sample_seed(g.seed, cell, i);
    auto cont = decode::generate(*bundle.model, prefix, run);
    set.samples.push_back({"gen-" + std::to_string(i), std::move(prefix), std::move(cont), run.seed});
  }
  if (set.empty()) throw Error(Errc::InsufficientData, "no prefix sequence is at least prefix_len long");
  const fs::path out = path_or(s, "output", g.out_dir / "samples.jsonl");
  write_jsonl(out, set);
  print({{"samples", set.size()}, {"output", out.string()}});
  return 0;
}

SampleSet read_sample_source(const fs::path& p) {
  if (p.extension() == ".jsonl") return read_jsonl(p);
  return SampleSet::from_sequences(io::read_ids(p).sequences, "ref");
}

metrics::BleuConfig bleu_config(const json& s) {
  metrics::BleuConfig b;
  b.max_n = get<int>(s, "max_n", b.max_n);
  b.smoothing_epsilon = get<double>(s, "epsilon", b.smoothing_epsilon);
  b.reference_subsample = get_opt<std::size_t>(s, "subsample");
  b.subsample_seed = get<std::uint64_t>(s, "subsample_seed", b.subsample_seed);
  b.validate();
  return b;
}

json bleu_json(const metrics::BleuConfig& b) {
  return {{"max_n", b.max_n},
          {"smoothing_epsilon", b.smoothing_epsilon},
          {"reference_subsample", b.reference_subsample ? json(*b.reference_subsample) : json(nullptr)},
          {"subsample_seed", b.subsample_seed}};
}

json provenance_json(const Provenance& p) {
  return {{"model", p.model},
          {"strategy", p.strategy},
          {"param", p.param ? json(*p.param) : json(nullptr)},
          {"seed", p.seed}};
}

json report(const std::string& metric, std::optional<double> value, json config, const SampleSet& gen,
            std::size_t nulls_excluded) {
  return {{"metric", metric},
          {"value", value && std::isfinite(*value) ? json(*value) : json(nullptr)},
          {"config", std::move(config)},
          {"provenance", provenance_json(gen.provenance)},
          {"n_samples", gen.size()},
          {"nulls_excluded", nulls_excluded}};
}

void emit_reports(const std::vector<json>& reports, const Globals& g) {
  json all = json::array();
  for (const auto& r : reports) {
    io::write_text(g.out_dir / ("report_" + r["metric"].get<std::string>() + ".json"), r.dump(1) + "\n");
    all.push_back(r);
  }
  print(all);
}

int eval_quality(const json& s, const Globals& g) {
  const auto gen = read_jsonl(need<std::string>(s, "samples"));
  const auto bleu = bleu_config(s);
  std::vector<json> reports;
  if (const auto ref = get<std::string>(s, "reference", ""); !ref.empty()) {
    const auto refs = read_sample_source(ref);
    reports.push_back(report("corpus_bleu", metrics::corpus_bleu(gen, refs, bleu), bleu_json(bleu), gen, 0));
  }
  std::unique_ptr<lm::LanguageModel> scorer;
  json scorer_cfg;
  if (const auto spec = get<std::string>(s, "scorer", ""); !spec.empty()) {
    scorer = lm::open_model(spec).model;
    scorer_cfg = {{"scorer", spec}};
  } else if (const auto tr = get<std::string>(s, "scorer_train", ""); !tr.empty()) {
    const auto f = io::read_ids(tr);
    const int order = get<int>(s, "scorer_order", 3);
    const double k_s = get<double>(s, "scorer_k_s", 1.0);
    scorer = std::make_unique<lm::NGramLM>(lm::NGramLM::fit(f.sequences, f.vocab_size, order, k_s));
    scorer_cfg = {{"scorer", "ngram"}, {"order", order}, {"k_s", k_s}, {"train", tr}};
  }
  if (scorer) reports.push_back(report("forward_ppl", metrics::forward_ppl(*scorer, gen), scorer_cfg, gen, 0));
  if (reports.empty()) throw Error(Errc::ConfigError, "quality eval needs --reference and/or --scorer/--scorer-train");
  emit_reports(reports, g);
  return 0;
}

int eval_diversity(const json& s, const Globals& g) {
  const auto gen = read_jsonl(need<std::string>(s, "samples"));
  const auto bleu = bleu_config(s);
  const int n = get<int>(s, "n", 4);
  std::vector<json> reports;
  reports.push_back(report("self_bleu", metrics::self_bleu(gen, bleu), bleu_json(bleu), gen, 0));
  const auto rep = metrics::mean_seq_rep_n(gen, n);
  reports.push_back(report("seq_rep_" + std::to_string(n), rep.mean, {{"n", n}}, gen, rep.nulls_excluded));
  if (const auto human = get<std::string>(s, "human", ""); !human.empty()) {
    const auto h = read_sample_source(human);
    metrics::ReversePplConfig rc;
    rc.vocab_size = get<std::size_t>(s, "vocab_size", 0);
    if (rc.vocab_size == 0) {
      if (fs::path(human).extension() == ".jsonl") throw Error(Errc::ConfigError, "reverse ppl needs --vocab-size");
      rc.vocab_size = io::read_ids(human).vocab_size;
    }
    rc.order = get<int>(s, "reverse_order", rc.order);
    rc.k_s = get<double>(s, "reverse_k_s", rc.k_s);
    reports.push_back(report("reverse_ppl", metrics::reverse_ppl(gen, h, rc),
                             {{"order", rc.order}, {"k_s", rc.k_s}, {"vocab_size", rc.vocab_size}}, gen, 0));
  }
  emit_reports(reports, g);
  return 0;
}

int run_selection(const json& s, const Globals& g, bool stories, const std::string& name) {
  const auto bundle = lm::open_model(need<std::string>(s, "model"));
  const auto codec = codec_for(bundle, s, g);
  auto encode = [&](std::string_view t) { return codec.encode(t); };
  std::vector<consistency::SelectionItem> items;
  std::vector<consistency::LineError> errors;
  if (stories) {
    auto loaded = consistency::load_stories(need<std::string>(s, "stories"));
    items = consistency::prepare(loaded.records, encode);
    errors = std::move(loaded.errors);
  } else {
    auto loaded = consistency::load_triples(need<std::string>(s, "triples"));
    items = consistency::prepare(loaded.records, encode);
    errors = std::move(loaded.errors);
  }
  const auto result = consistency::selection_accuracy(*bundle.model, items);
  std::string lines;
  for (std::size_t i = 0; i < result.per_item.size(); ++i) {
    const auto& r = result.per_item[i];
    json j{{"index", i},
           {"ppl_correct", std::isfinite(r.ppl_correct) ? json(r.ppl_correct) : json(nullptr)},
           {"ppl_wrong", std::isfinite(r.ppl_wrong) ? json(r.ppl_wrong) : json(nullptr)},
           {"picked", consistency::pick_name(r.picked)}};
    lines += j.dump() + "\n";
  }
  const fs::path items_path = g.out_dir / (name + "_items.jsonl");
  io::write_text(items_path, lines);
  json errs = json::array();
  for (const auto& e : errors) errs.push_back({{"line", e.line}, {"message", e.message}});
  json rep{{"accuracy", result.accuracy},
           {"n", result.n},
           {"ties", result.ties},
           {"per_item", items_path.string()},
           {"errors", errs}};
  io::write_text(g.out_dir / (name + "_report.json"), rep.dump(1) + "\n");
  print(rep);
  return 0;
}

int eval_acceptability(const json& s, const Globals& g) {
  const auto bundle = lm::open_model(need<std::string>(s, "model"));
  const auto codec = codec_for(bundle, s, g);
  const double alpha = get<double>(s, "alpha", 0.6);
  const auto context = codec.encode(get<std::string>(s, "context", ""));
  std::istringstream in(io::read_text(need<std::string>(s, "sentences")));
  std::string line, items;
  double sum = 0.0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto ids = codec.encode(line);
    const double v = metrics::acceptability_penlp(*bundle.model, ids, context, alpha);
    items += json{{"index", n}, {"penlp", std::isfinite(v) ? json(v) : json(nullptr)}}.dump() + "\n";
    sum += v;
    ++n;
  }
  if (n == 0) throw Error(Errc::EmptyDataset, "no sentences to score");
  io::write_text(g.out_dir / "acceptability_items.jsonl", items);
  SampleSet empty;
  empty.provenance.model = get<std::string>(s, "model", "");
  auto r = report("acceptability_penlp", sum / static_cast<double>(n), {{"alpha", alpha}}, empty, 0);
  r["n_samples"] = n;
  emit_reports({r}, g);
  return 0;
}

int cmd_sweep(json s, const Globals& g) {
  // Grid flags look like `topp=0.2,0.4` or `greedy`.
  if (s.contains("grid")) {
    json strategies = json::array();
    for (const auto& spec : get<std::vector<std::string>>(s, "grid", {})) {
      const auto eq = spec.find('=');
      json entry{{"strategy", spec.substr(0, eq)}};
      json params = json::array();
      if (eq != std::string::npos) {
        std::stringstream ss(spec.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            params.push_back(std::stod(item));
          } catch (const std::logic_error&) {
            throw Error(Errc::ConfigError, "bad grid value '" + item + "'");
          }
        }
      }
      entry["params"] = params;
      strategies.push_back(entry);
    }
    s["strategies"] = strategies;
    s.erase("grid");
  }
  if (!s.contains("out_dir") || g.out_dir != fs::path(".")) s["out_dir"] = g.out_dir.string();
  s["seed"] = g.seed;
  s["workers"] = g.workers;
  if (!s.contains("train")) s["train"] = (g.out_dir / "train.ids").string();
  if (!s.contains("test")) s["test"] = (g.out_dir / "test.ids").string();
  if (s.contains("subsample")) {
    s["bleu"]["reference_subsample"] = s["subsample"];
    s.erase("subsample");
  }
  const auto cfg = harness::sweep_config_from_json(s.dump());
  const auto result = harness::run_sweep(cfg);
  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.failed ? 1 : 0;
  print({{"records", result.records.size()},
         {"computed", result.computed},
         {"reused", result.reused},
         {"failed", failed},
         {"csv", (cfg.out_dir / "sweep.csv").string()}});
  return 0;
}

int cmd_fit(const json& s, const Globals& g) {
  const auto records = harness::read_records(path_or(s, "records", g.out_dir / "records.jsonl"));
  const auto table = harness::tradeoff_table(records, get<std::string>(s, "quality", "corpus_bleu"),
                                             get<std::string>(s, "diversity", "self_bleu"));
  io::write_text(g.out_dir / "tradeoff.csv", table.rows_csv());
  io::write_text(g.out_dir / "fits.csv", table.fits_csv());
  std::cout << table.fits_csv();
  return 0;
}

int cmd_trace(const json& s, const Globals& g) {
  const auto bundle = lm::open_model(need<std::string>(s, "model"));
  std::vector<TokenId> seq, context;
  if (const auto text = get<std::string>(s, "text", ""); !text.empty()) {
    const auto codec = codec_for(bundle, s, g);
    seq = codec.encode(text);
    context = codec.encode(get<std::string>(s, "context", ""));
  } else {
    seq = parse_id_text(need<std::string>(s, "ids"));
    context = parse_id_text(get<std::string>(s, "context_ids", ""));
  }
  std::optional<decode::Transform> tr;
  const auto mode = get<std::string>(s, "truncation", "none");
  if (mode == "topk") tr = decode::TopK{need<std::size_t>(s, "k")};
  else if (mode == "topp") tr = decode::TopP{need<double>(s, "p")};
  else if (mode != "none") throw Error(Errc::ConfigError, "truncation must be none, topk or topp");
  const auto trace = lm::token_prob_trace(*bundle.model, seq, tr, context);
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += json{{"position", i}, {"token", trace[i].token}, {"raw", trace[i].raw}, {"truncated", trace[i].truncated}}
               .dump() +
           "\n";
  }
  if (const auto o = get<std::string>(s, "output", ""); !o.empty()) io::write_text(o, out);
  std::cout << out;
  return 0;
}

int cmd_serve(const json& s, const Globals&) {
  const auto bundle = lm::open_model(need<std::string>(s, "model"));
  const auto port = get<int>(s, "port", -1);
  if (port < 0) {
    lm::serve_stream(*bundle.model, std::cin, std::cout);
    return 0;
  }
  if (port > 65535) throw Error(Errc::ConfigError, "port out of range");
  lm::TcpServer server(*bundle.model, static_cast<std::uint16_t>(port));
  std::cerr << "listening on 127.0.0.1:" << server.port() << std::endl;
  server.run(get<std::size_t>(s, "max_connections", 0));
  return 0;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    auto j = json::parse(io::read_text(path));
    if (!j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, "config: " + std::string(e.what()));
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-model evaluation toolkit: decoding, training objectives, quality/diversity/consistency metrics"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t workers = 1;
  auto* o_config = app.add_option("--config", config_path, "JSON config file");
  auto* o_seed = app.add_option("--seed", seed, "Global seed");
  auto* o_out = app.add_option("--out-dir", out_dir, "Output directory");
  auto* o_workers = app.add_option("--workers", workers, "Worker threads for sweeps");
  (void)o_config;

  Flags ingest(app.add_subcommand("ingest", "Tokenize a corpus and write train/dev/test splits"));
  ingest.opt<std::string>("--input", "input", "Raw UTF-8 text file")
      .opt<std::string>("--ids", "ids", "Pre-tokenized id file")
      .opt<std::string>("--scheme", "scheme", "word|char")
      .opt<std::size_t>("--seq-len", "seq_len", "Chunk length")
      .opt<std::vector<double>>("--ratios", "ratios", "train,dev,test ratios");

  Flags train(app.add_subcommand("train", "Fit an n-gram model or train a feed-forward model"));
  train.opt<std::string>("--backend", "backend", "ffn|ngram")
      .opt<std::string>("--train", "train", "Training id file")
      .opt<std::string>("--vocab", "vocab", "Vocabulary JSON")
      .opt<std::string>("--model-out", "model_out", "Output model path")
      .opt<int>("--order", "order", "n-gram order")
      .opt<double>("--k-s", "k_s", "Add-k smoothing constant")
      .opt<std::size_t>("--context", "context", "FFN context window")
      .opt<std::size_t>("--embed", "embed", "Embedding size")
      .opt<std::size_t>("--hidden", "hidden", "Hidden size")
      .opt<int>("--epochs", "epochs", "Epochs")
      .opt<std::size_t>("--batch-size", "batch_size", "Batch size")
      .opt<double>("--lr", "lr", "Learning rate")
      .opt<std::vector<std::string>>("--objectives", "objectives", "name[:weight] list: mle,ul,margin,tfidf,classify")
      .opt<double>("--ul-mix", "ul_mix", "Probability of the sequence-level unlikelihood branch")
      .opt<std::size_t>("--ul-prefix", "ul_prefix", "Sequence-level prefix length")
      .opt<std::size_t>("--ul-gen", "ul_gen", "Sequence-level continuation length")
      .opt<int>("--ul-ngram", "ul_ngram", "Repeated n-gram order")
      .opt<double>("--margin", "margin", "Margin for the ranking loss")
      .opt<std::string>("--pairs-text", "pairs_text", "Raw text for sentence pairs")
      .opt<std::string>("--pair-mode", "pair_mode", "nsp|sop")
      .opt<std::size_t>("--pair-count", "pair_count", "Number of pair examples")
      .opt<std::size_t>("--tfidf-doc-len", "tfidf_doc_len", "TF-IDF document length")
      .opt<std::string>("--labels", "labels", "Token label TSV")
      .opt<std::string>("--label-column", "label_column", "tag|head")
      .opt<std::string>("--log", "log", "Training log path");

  Flags gen(app.add_subcommand("generate", "Decode continuations for prefixes"));
  gen.opt<std::string>("--model", "model", "Model file or exec:/tcp: spec")
      .opt<std::string>("--prefixes", "prefixes", "Id file with prefix sequences")
      .opt<std::size_t>("--prefix-len", "prefix_len", "Prefix length")
      .opt<std::size_t>("--gen-len", "gen_len", "Continuation length")
      .opt<std::string>("--strategy", "strategy", "greedy|beam|temp|topk|topp|penalized")
      .opt<int>("--b", "b", "Beam width")
      .opt<double>("--t", "t", "Temperature")
      .opt<int>("--k", "k", "Top-k")
      .opt<double>("--p", "p", "Top-p")
      .opt<double>("--theta", "theta", "Repetition penalty")
      .opt<std::size_t>("--max-prefixes", "max_prefixes", "Cap on the number of prefixes")
      .opt<std::string>("--output", "output", "Output JSONL");

  auto* eval_app = app.add_subcommand("eval", "Compute metrics");
  std::string eval_kind;
  eval_app->add_option("kind", eval_kind, "quality|diversity|consistency|acceptability")
      ->required()
      ->check(CLI::IsMember({"quality", "diversity", "consistency", "acceptability"}));
  Flags eval(eval_app);
  eval.opt<std::string>("--samples", "samples", "Generated SampleSet JSONL")
      .opt<std::string>("--reference", "reference", "Reference SampleSet JSONL or id file")
      .opt<std::string>("--scorer", "scorer", "Forward-ppl scorer spec")
      .opt<std::string>("--scorer-train", "scorer_train", "Id file to fit an n-gram scorer on")
      .opt<int>("--scorer-order", "scorer_order", "n-gram scorer order")
      .opt<double>("--scorer-k-s", "scorer_k_s", "n-gram scorer smoothing")
      .opt<std::string>("--human", "human", "Human text for reverse ppl (JSONL or id file)")
      .opt<std::size_t>("--vocab-size", "vocab_size", "Vocabulary size for reverse ppl")
      .opt<int>("--reverse-order", "reverse_order", "Reverse-ppl n-gram order")
      .opt<double>("--reverse-k-s", "reverse_k_s", "Reverse-ppl smoothing")
      .opt<int>("--max-n", "max_n", "BLEU order")
      .opt<double>("--epsilon", "epsilon", "BLEU smoothing epsilon")
      .opt<std::size_t>("--subsample", "subsample", "Candidate subsample size")
      .opt<std::uint64_t>("--subsample-seed", "subsample_seed", "Subsample seed")
      .opt<int>("--n", "n", "seq-rep n")
      .opt<std::string>("--model", "model", "Model for consistency/acceptability")
      .opt<std::string>("--vocab", "vocab", "Vocabulary JSON")
      .opt<std::string>("--triples", "triples", "NLI triples TSV")
      .opt<std::string>("--stories", "stories", "Story TSV")
      .opt<std::string>("--sentences", "sentences", "Sentences, one per line")
      .opt<std::string>("--context", "context", "Context text")
      .opt<double>("--alpha", "alpha", "PenLP exponent");

  Flags sweep(app.add_subcommand("sweep", "Run a (model x strategy x param) sweep"));
  sweep.opt<std::vector<std::string>>("--models", "models", "Model files or specs")
      .opt<std::vector<std::string>>("--grid", "grid", "strategy[=p1,p2,...] entries; repeat the flag per strategy")
      .opt<std::string>("--train", "train", "Train id file (prefixes)")
      .opt<std::string>("--test", "test", "Test id file (reverse ppl)")
      .opt<std::size_t>("--prefix-len", "prefix_len", "Prefix length")
      .opt<std::size_t>("--gen-len", "gen_len", "Continuation length")
      .opt<std::size_t>("--max-prefixes", "max_prefixes", "Cap on prefixes per cell")
      .opt<std::vector<std::string>>("--metrics", "metrics", "Metric list")
      .opt<std::string>("--scorer", "scorer", "Forward-ppl scorer spec")
      .opt<std::size_t>("--subsample", "subsample", "BLEU candidate subsample");
  // --grid values contain commas, so they must not be split.
  sweep.app()->get_option("--grid")->delimiter('\0');

  Flags fit(app.add_subcommand("fit", "Trade-off table and log-curve fits from sweep records"));
  fit.opt<std::string>("--records", "records", "records.jsonl")
      .opt<std::string>("--quality", "quality", "Quality metric")
      .opt<std::string>("--diversity", "diversity", "Diversity metric");

  Flags trace(app.add_subcommand("trace", "Per-token probabilities with optional truncation"));
  trace.opt<std::string>("--model", "model", "Model spec")
      .opt<std::string>("--text", "text", "Text to trace")
      .opt<std::string>("--ids", "ids", "Space-separated ids to trace")
      .opt<std::string>("--context", "context", "Context text")
      .opt<std::string>("--context-ids", "context_ids", "Context ids")
      .opt<std::string>("--vocab", "vocab", "Vocabulary JSON")
      .opt<std::string>("--truncation", "truncation", "none|topk|topp")
      .opt<std::size_t>("--k", "k", "Top-k")
      .opt<double>("--p", "p", "Top-p")
      .opt<std::string>("--output", "output", "Output JSONL");

  Flags nli(app.add_subcommand("nli", "Selection accuracy on NLI triples"));
  nli.opt<std::string>("--model", "model", "Model spec")
      .opt<std::string>("--triples", "triples", "Triples TSV")
      .opt<std::string>("--vocab", "vocab", "Vocabulary JSON");

  Flags story(app.add_subcommand("story", "Selection accuracy on story endings"));
  story.opt<std::string>("--model", "model", "Model spec")
      .opt<std::string>("--stories", "stories", "Stories TSV")
      .opt<std::string>("--vocab", "vocab", "Vocabulary JSON");

  Flags serve(app.add_subcommand("serve", "Serve a model over the line protocol"));
  serve.opt<std::string>("--model", "model", "Model spec")
      .opt<int>("--port", "port", "TCP port (omit for stdio)")
      .opt<std::size_t>("--max-connections", "max_connections", "Stop after this many connections");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Globals g;
    g.config = load_config(config_path);
    g.seed = o_seed->count() ? seed : get<std::uint64_t>(g.config, "seed", 0);
    g.out_dir = o_out->count() ? fs::path(out_dir) : fs::path(get<std::string>(g.config, "out_dir", "."));
    g.workers = o_workers->count() ? workers : get<std::size_t>(g.config, "workers", 1);
    fs::create_directories(g.out_dir);

    auto section = [&](const std::string& name) {
      return g.config.contains(name) ? g.config[name] : json::object();
    };
    auto sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "ingest") return cmd_ingest(ingest.merge(section("ingest")), g);
    if (name == "train") return cmd_train(train.merge(section("train")), g);
    if (name == "generate") return cmd_generate(gen.merge(section("generate")), g);
    if (name == "sweep") return cmd_sweep(sweep.merge(section("sweep")), g);
    if (name == "fit") return cmd_fit(fit.merge(section("fit")), g);
    if (name == "trace") return cmd_trace(trace.merge(section("trace")), g);
    if (name == "nli") return run_selection(nli.merge(section("nli")), g, false, "nli");
    if (name == "story") return run_selection(story.merge(section("story")), g, true, "story");
    if (name == "serve") return cmd_serve(serve.merge(section("serve")), g);
    if (name == "eval") {
      const auto s = eval.merge(section("eval"));
      if (eval_kind == "quality") return eval_quality(s, g);
      if (eval_kind == "diversity") return eval_diversity(s, g);
      if (eval_kind == "acceptability") return eval_acceptability(s, g);
      const bool stories = s.contains("stories");
      return run_selection(s, g, stories, stories ? "story" : "nli");
    }
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return e.is_config_error() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}
