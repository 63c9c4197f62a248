#include "lmeval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lmeval/adapter.hpp"
#include "lmeval/error.hpp"
#include "lmeval/io.hpp"
#include "lmeval/rng.hpp"

namespace lmeval::harness {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr MetricKind kAllMetrics[] = {MetricKind::CorpusBleu, MetricKind::SelfBleu,
                                      MetricKind::SeqRep4, MetricKind::ForwardPpl,
                                      MetricKind::ReversePpl};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t file_hash(const fs::path& path) {
  std::error_code ec;
  if (path.empty() || !fs::is_regular_file(path, ec)) return 0;
  return fnv1a64(io::read_text(path));
}

ojson optional_number(std::optional<double> v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> finite_or_null(double v) {
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

std::string param_text(std::optional<double> param) { return param ? format_number(param) : "none"; }

// File-system friendly cell key, unique within a grid.
std::string cell_key(const Cell& cell) {
  std::string stem = fs::path(cell.model).stem().string();
  for (char& c : stem) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (stem.empty()) stem = "model";
  return std::to_string(cell.model_index) + "-" + stem + "-" +
         std::string(decode::strategy_name(cell.strategy)) + "-" + param_text(cell.param);
}

struct SharedInputs {
  std::vector<std::vector<TokenId>> prefixes;
  SampleSet reference;
  SampleSet human_test;
  std::unique_ptr<lm::LanguageModel> owned_scorer;
  const lm::LanguageModel* scorer = nullptr;
  std::size_t vocab_size = 0;
  std::uint64_t inputs_hash = 0;
};

struct LoadedModel {
  std::unique_ptr<lm::LanguageModel> model;
  std::string error;
  std::uint64_t file_hash = 0;
};

std::string compute_cell_hash(const SweepConfig& cfg, const Cell& cell, const LoadedModel& lm,
                              const SharedInputs& shared) {
  ojson j;
  j["model"] = cell.model;
  j["model_hash"] = hex64(lm.file_hash);
  j["strategy"] = decode::strategy_name(cell.strategy);
  j["param"] = optional_number(cell.param);
  j["prefix_len"] = cfg.prefix_len;
  j["gen_len"] = cfg.gen_len;
  j["seed"] = cfg.seed;
  std::vector<std::string> names;
  for (auto m : cfg.metrics) names.emplace_back(metric_name(m));
  j["metrics"] = names;
  j["bleu"] = {{"max_n", cfg.bleu.max_n},
               {"eps", cfg.bleu.smoothing_epsilon},
               {"subsample", cfg.bleu.reference_subsample ? ojson(*cfg.bleu.reference_subsample) : ojson(nullptr)},
               {"subsample_seed", cfg.bleu.subsample_seed}};
  j["inputs"] = hex64(shared.inputs_hash);
  j["scorer"] = cfg.scorer;
  j["scorer_order"] = cfg.scorer_order;
  j["scorer_k_s"] = cfg.scorer_k_s;
  j["reverse_order"] = cfg.reverse_order;
  j["reverse_k_s"] = cfg.reverse_k_s;
  j["max_prefixes"] = cfg.max_prefixes ? ojson(*cfg.max_prefixes) : ojson(nullptr);
  return hex64(fnv1a64(j.dump()));
}

bool uses(const SweepConfig& cfg, MetricKind m) {
  return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end();
}

SharedInputs load_shared(const SweepConfig& cfg) {
  SharedInputs s;
  const auto train = io::read_ids(cfg.train_ids);
  s.vocab_size = train.vocab_size;
  std::vector<std::vector<TokenId>> refs;
  for (const auto& seq : train.sequences) {
    if (cfg.max_prefixes && s.prefixes.size() >= *cfg.max_prefixes) break;
    if (seq.size() <= cfg.prefix_len) continue;
    s.prefixes.emplace_back(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(cfg.prefix_len));
    const std::size_t end = std::min(seq.size(), cfg.prefix_len + cfg.gen_len);
    refs.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(cfg.prefix_len),
                      seq.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (s.prefixes.empty()) {
    throw Error(Errc::InsufficientData, "no training sequence is longer than prefix_len = " +
                                            std::to_string(cfg.prefix_len));
  }
  s.reference = SampleSet::from_sequences(refs, "human");
  std::uint64_t h = fnv1a64(io::format_ids(train));
  if (uses(cfg, MetricKind::ReversePpl)) {
    auto test = io::read_ids(cfg.test_ids);
    if (test.vocab_size != s.vocab_size) {
      throw Error(Errc::ConfigError, "train and test id files disagree on vocab_size");
    }
    h = fnv1a64(io::format_ids(test), h);
    s.human_test = SampleSet::from_sequences(test.sequences, "test");
  }
  if (uses(cfg, MetricKind::ForwardPpl)) {
    if (cfg.scorer.empty()) {
      s.owned_scorer = std::make_unique<lm::NGramLM>(
          lm::NGramLM::fit(train.sequences, s.vocab_size, cfg.scorer_order, cfg.scorer_k_s));
    } else {
      s.owned_scorer = lm::open_model(cfg.scorer).model;
      h = fnv1a64(hex64(file_hash(cfg.scorer)), h);
    }
    if (s.owned_scorer->vocab_size() != s.vocab_size) {
      throw Error(Errc::ConfigError, "forward-ppl scorer vocab_size does not match the corpus");
    }
    s.scorer = s.owned_scorer.get();
  }
  s.inputs_hash = h;
  return s;
}

std::optional<SweepRecord> try_resume(const fs::path& out_dir, const std::string& key,
                                      const std::string& hash) {
  const auto record_path = out_dir / "cells" / (key + ".json");
  std::error_code ec;
  if (!fs::is_regular_file(record_path, ec)) return std::nullopt;
  try {
    auto rec = parse_record(io::read_text(record_path));
    if (rec.failed || rec.cell_hash != hash) return std::nullopt;
    const auto samples = out_dir / rec.samples_file;
    if (!fs::is_regular_file(samples, ec) || hex64(file_hash(samples)) != rec.samples_hash) {
      return std::nullopt;
    }
    return rec;
  } catch (const Error&) {
    return std::nullopt;
  }
}

SweepRecord run_cell(const SweepConfig& cfg, const Cell& cell, const LoadedModel& loaded,
                     const SharedInputs& shared, const std::string& key, const std::string& hash) {
  SweepRecord rec;
  rec.model = cell.model;
  rec.strategy = cell.strategy;
  rec.param = cell.param;
  rec.seed = cfg.seed;
  rec.cell_hash = hash;
  for (auto m : cfg.metrics) rec.metrics[std::string(metric_name(m))] = std::nullopt;
  try {
    if (!loaded.model) throw std::runtime_error(loaded.error);
    const auto& model = *loaded.model;
    if (model.vocab_size() != shared.vocab_size) {
      throw Error(Errc::ConfigError, "model vocab_size " + std::to_string(model.vocab_size()) +
                                         " does not match corpus vocab_size " +
                                         std::to_string(shared.vocab_size));
    }
    SampleSet gen;
    gen.provenance = {cell.model, std::string(decode::strategy_name(cell.strategy)), cell.param, cfg.seed};
    gen.samples.reserve(shared.prefixes.size());
    for (std::size_t i = 0; i < shared.prefixes.size(); ++i) {
      const std::uint64_t s = sample_seed(cfg.seed, cell, i);
      const auto dc = decode::DecoderConfig::make(cell.strategy, cell.param, s, cfg.gen_len);
      gen.samples.push_back(Sample{key + "-" + std::to_string(i), shared.prefixes[i],
                                   decode::generate(model, shared.prefixes[i], dc), s});
    }
    rec.n_samples = gen.size();
    rec.samples_file = "samples/" + key + ".jsonl";
    const std::string text = to_jsonl(gen);
    io::write_text(cfg.out_dir / rec.samples_file, text);
    rec.samples_hash = hex64(fnv1a64(text));

    MetricInputs in;
    in.reference = &shared.reference;
    in.human_test = &shared.human_test;
    in.scorer = shared.scorer;
    in.bleu = cfg.bleu;
    in.reverse = {shared.vocab_size, cfg.reverse_order, cfg.reverse_k_s};
    for (auto m : cfg.metrics) rec.metrics[std::string(metric_name(m))] = evaluate_metric(m, gen, in);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.n_samples = 0;
    rec.samples_file.clear();
    rec.samples_hash.clear();
  }
  io::write_text(cfg.out_dir / "cells" / (key + ".json"), record_json(rec) + "\n");
  return rec;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

MetricKind parse_metric(std::string_view name) {
  for (auto m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw Error(Errc::ConfigError, "unknown metric '" + std::string(name) + "'");
}

std::string_view metric_name(MetricKind m) noexcept {
  switch (m) {
    case MetricKind::CorpusBleu: return "corpus_bleu";
    case MetricKind::SelfBleu: return "self_bleu";
    case MetricKind::SeqRep4: return "seq_rep_4";
    case MetricKind::ForwardPpl: return "forward_ppl";
    case MetricKind::ReversePpl: return "reverse_ppl";
  }
  return "";
}

bool higher_is_better(std::string_view metric) noexcept { return metric == "corpus_bleu"; }

void SweepConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::ConfigError, "sweep: " + why); };
  if (prefix_len < 1) fail("prefix_len must be >= 1");
  if (gen_len < 1) fail("gen_len must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (out_dir.empty()) fail("out_dir is required");
  if (train_ids.empty()) fail("train id file is required");
  if (std::find(metrics.begin(), metrics.end(), MetricKind::ReversePpl) != metrics.end() &&
      test_ids.empty()) {
    fail("reverse_ppl needs a test id file");
  }
  if (!(reverse_k_s > 0.0)) fail("reverse_k_s must be > 0");
  if (reverse_order < 1 || scorer_order < 1) fail("n-gram orders must be >= 1");
  if (scorer_k_s < 0.0) fail("scorer_k_s must be >= 0");
  bleu.validate();
  for (const auto& g : strategies) {
    if (g.strategy == decode::Strategy::Greedy) continue;
    if (g.params.empty()) fail(std::string(decode::strategy_name(g.strategy)) + " needs a parameter list");
    for (double p : g.params) {
      decode::DecoderConfig::make(g.strategy, p, 0, gen_len)
          .validate(std::numeric_limits<std::size_t>::max());
    }
  }
}

SweepConfig sweep_config_from_json(const std::string& text) {
  SweepConfig cfg;
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("sweep config: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::ConfigError, "sweep config must be a JSON object");
  static const std::set<std::string> known{
      "models", "strategies", "prefix_len", "gen_len", "seed", "metrics", "train", "test",
      "out_dir", "max_prefixes", "bleu", "scorer", "scorer_order", "scorer_k_s",
      "reverse_order", "reverse_k_s", "workers"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw Error(Errc::ConfigError, "sweep config: unknown key '" + k + "'");
  }
  try {
    if (j.contains("models")) cfg.models = j["models"].get<std::vector<std::string>>();
    if (j.contains("strategies")) {
      for (const auto& s : j["strategies"]) {
        StrategyGrid g;
        g.strategy = decode::parse_strategy(s.at("strategy").get<std::string>());
        if (s.contains("params")) g.params = s["params"].get<std::vector<double>>();
        cfg.strategies.push_back(std::move(g));
      }
    }
    if (j.contains("prefix_len")) cfg.prefix_len = j["prefix_len"].get<std::size_t>();
    if (j.contains("gen_len")) cfg.gen_len = j["gen_len"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("metrics")) {
      cfg.metrics.clear();
      for (const auto& m : j["metrics"]) cfg.metrics.push_back(parse_metric(m.get<std::string>()));
    }
    if (j.contains("train")) cfg.train_ids = j["train"].get<std::string>();
    if (j.contains("test")) cfg.test_ids = j["test"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("max_prefixes") && !j["max_prefixes"].is_null()) {
      cfg.max_prefixes = j["max_prefixes"].get<std::size_t>();
    }
    if (j.contains("bleu")) {
      const auto& b = j["bleu"];
      if (b.contains("max_n")) cfg.bleu.max_n = b["max_n"].get<int>();
      if (b.contains("smoothing_epsilon")) cfg.bleu.smoothing_epsilon = b["smoothing_epsilon"].get<double>();
      if (b.contains("reference_subsample") && !b["reference_subsample"].is_null()) {
        cfg.bleu.reference_subsample = b["reference_subsample"].get<std::size_t>();
      }
      if (b.contains("subsample_seed")) cfg.bleu.subsample_seed = b["subsample_seed"].get<std::uint64_t>();
    }
    if (j.contains("scorer")) cfg.scorer = j["scorer"].get<std::string>();
    if (j.contains("scorer_order")) cfg.scorer_order = j["scorer_order"].get<int>();
    if (j.contains("scorer_k_s")) cfg.scorer_k_s = j["scorer_k_s"].get<double>();
    if (j.contains("reverse_order")) cfg.reverse_order = j["reverse_order"].get<int>();
    if (j.contains("reverse_k_s")) cfg.reverse_k_s = j["reverse_k_s"].get<double>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<std::size_t>();
  } catch (const ojson::exception& e) {
    throw Error(Errc::ConfigError, std::string("sweep config: ") + e.what());
  }
  return cfg;
}

std::vector<Cell> enumerate_cells(const SweepConfig& cfg) {
  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    for (const auto& g : cfg.strategies) {
      if (g.strategy == decode::Strategy::Greedy) {
        cells.push_back({mi, cfg.models[mi], g.strategy, std::nullopt});
        continue;
      }
      for (double p : g.params) cells.push_back({mi, cfg.models[mi], g.strategy, p});
    }
  }
  return cells;
}

std::uint64_t sample_seed(std::uint64_t seed, const Cell& cell, std::size_t index) {
  const std::string key = cell.model + "|" + std::string(decode::strategy_name(cell.strategy)) + "|" +
                          param_text(cell.param) + "|" + std::to_string(index);
  return SplitMix64(seed ^ fnv1a64(key)).next();
}

std::string record_json(const SweepRecord& r) {
  ojson j;
  j["model"] = r.model;
  j["strategy"] = decode::strategy_name(r.strategy);
  j["param"] = optional_number(r.param);
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  ojson m = ojson::object();
  for (const auto& [name, value] : r.metrics) m[name] = optional_number(value);
  j["metrics"] = m;
  j["failed"] = r.failed;
  j["error"] = r.error;
  j["cell_hash"] = r.cell_hash;
  j["samples_file"] = r.samples_file;
  j["samples_hash"] = r.samples_hash;
  return j.dump();
}

SweepRecord parse_record(const std::string& line) {
  try {
    const auto j = ojson::parse(line);
    SweepRecord r;
    r.model = j.at("model").get<std::string>();
    r.strategy = decode::parse_strategy(j.at("strategy").get<std::string>());
    if (!j.at("param").is_null()) r.param = j["param"].get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [name, value] : j.at("metrics").items()) {
      r.metrics[name] = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
    }
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string());
    r.cell_hash = j.value("cell_hash", std::string());
    r.samples_file = j.value("samples_file", std::string());
    r.samples_hash = j.value("samples_hash", std::string());
    return r;
  } catch (const ojson::exception& e) {
    throw Error(Errc::FormatError, std::string("sweep record: ") + e.what());
  }
}

std::vector<SweepRecord> read_records(const fs::path& path) {
  std::vector<SweepRecord> out;
  std::istringstream in(io::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_record(line));
  }
  return out;
}

std::string format_number(std::optional<double> v) {
  if (!v) return "";
  if (std::isnan(*v)) return "nan";
  if (std::isinf(*v)) return *v < 0 ? "-inf" : "inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, ptr);
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
  std::string out =
      "model,strategy,param,n_samples,corpus_bleu,self_bleu,seq_rep_4,forward_ppl,reverse_ppl,seed,schema\n";
  for (const auto& r : records) {
    auto metric = [&](MetricKind m) {
      const auto it = r.metrics.find(std::string(metric_name(m)));
      return format_number(it == r.metrics.end() ? std::nullopt : it->second);
    };
    out += csv_field(r.model) + "," + std::string(decode::strategy_name(r.strategy)) + "," +
           format_number(r.param) + "," + std::to_string(r.n_samples);
    for (auto m : kAllMetrics) out += "," + metric(m);
    out += "," + std::to_string(r.seed) + ",v1\n";
  }
  return out;
}

std::optional<double> evaluate_metric(MetricKind kind, const SampleSet& gen, const MetricInputs& in) {
  switch (kind) {
    case MetricKind::CorpusBleu:
      if (!in.reference || in.reference->empty() || gen.empty()) return std::nullopt;
      return finite_or_null(metrics::corpus_bleu(gen, *in.reference, in.bleu));
    case MetricKind::SelfBleu:
      if (gen.size() < 2) return std::nullopt;
      return finite_or_null(metrics::self_bleu(gen, in.bleu));
    case MetricKind::SeqRep4:
      return metrics::mean_seq_rep_n(gen, 4).mean;
    case MetricKind::ForwardPpl:
      if (!in.scorer || gen.empty()) return std::nullopt;
      return finite_or_null(metrics::forward_ppl(*in.scorer, gen));
    case MetricKind::ReversePpl:
      if (!in.human_test || in.human_test->empty() || gen.empty()) return std::nullopt;
      return finite_or_null(metrics::reverse_ppl(gen, *in.human_test, in.reverse));
  }
  return std::nullopt;
}

SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const auto cells = enumerate_cells(cfg);
  SweepResult result;
  fs::create_directories(cfg.out_dir / "cells");
  fs::create_directories(cfg.out_dir / "samples");
  if (cells.empty()) {
    io::write_text(cfg.out_dir / "records.jsonl", "");
    io::write_text(cfg.out_dir / "sweep.csv", sweep_csv({}));
    return result;
  }

  const SharedInputs shared = load_shared(cfg);

  std::vector<LoadedModel> models(cfg.models.size());
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    models[i].file_hash = file_hash(cfg.models[i]);
    try {
      models[i].model = lm::open_model(cfg.models[i]).model;
    } catch (const std::exception& e) {
      models[i].error = e.what();
    }
  }

  std::vector<std::string> keys, hashes;
  for (const auto& cell : cells) {
    keys.push_back(cell_key(cell));
    hashes.push_back(compute_cell_hash(cfg, cell, models[cell.model_index], shared));
  }

  std::vector<SweepRecord> slots(cells.size());
  std::vector<char> reused(cells.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      if (auto prev = try_resume(cfg.out_dir, keys[i], hashes[i])) {
        slots[i] = std::move(*prev);
        reused[i] = 1;
        continue;
      }
      slots[i] = run_cell(cfg, cells[i], models[cells[i].model_index], shared, keys[i], hashes[i]);
    }
  };
  const std::size_t n_workers = std::min(cfg.workers, cells.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  std::string records;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    records += record_json(slots[i]) + "\n";
    if (reused[i]) ++result.reused;
    else ++result.computed;
  }
  io::write_text(cfg.out_dir / "records.jsonl", records);
  io::write_text(cfg.out_dir / "sweep.csv", sweep_csv(slots));
  result.records = std::move(slots);
  return result;
}

LogFit fit_log_curve(const std::vector<std::pair<double, double>>& points) {
  std::set<double> distinct;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      throw Error(Errc::InvalidArgument, "log fit needs finite points with x > 0");
    }
    distinct.insert(x);
  }
  if (distinct.size() < 2) throw Error(Errc::DegenerateFit, "need at least 2 distinct x values");
  const double n = static_cast<double>(points.size());
  double mean_u = 0.0, mean_y = 0.0;
  for (const auto& [x, y] : points) {
    mean_u += std::log(x);
    mean_y += y;
  }
  mean_u /= n;
  mean_y /= n;
  // Centered normal equations are better conditioned than raw sums.
  double suu = 0.0, suy = 0.0;
  for (const auto& [x, y] : points) {
    const double du = std::log(x) - mean_u;
    suu += du * du;
    suy += du * (y - mean_y);
  }
  LogFit fit;
  fit.a = suy / suu;
  fit.b = mean_y - fit.a * mean_u;
  for (const auto& [x, y] : points) {
    const double r = y - (fit.a * std::log(x) + fit.b);
    fit.residual_sum += r * r;
  }
  return fit;
}

TradeoffTable tradeoff_table(const std::vector<SweepRecord>& records, std::string_view quality_metric,
                             std::string_view diversity_metric) {
  parse_metric(quality_metric);
  parse_metric(diversity_metric);
  const bool negate = higher_is_better(quality_metric);
  TradeoffTable table;
  std::vector<std::string> model_order;
  std::map<std::string, std::vector<std::pair<double, double>>> points;
  for (const auto& r : records) {
    TradeoffRow row{r.model, r.strategy, r.param, std::nullopt, std::nullopt};
    auto get = [&](std::string_view name) -> std::optional<double> {
      const auto it = r.metrics.find(std::string(name));
      return it == r.metrics.end() ? std::nullopt : it->second;
    };
    row.x = get(diversity_metric);
    row.y = get(quality_metric);
    if (row.y && negate) row.y = -*row.y;
    if (std::find(model_order.begin(), model_order.end(), r.model) == model_order.end()) {
      model_order.push_back(r.model);
    }
    if (row.x && row.y && *row.x > 0.0) points[r.model].emplace_back(*row.x, *row.y);
    table.rows.push_back(std::move(row));
  }
  for (const auto& model : model_order) {
    ModelFit mf{model, std::nullopt, {}};
    try {
      mf.fit = fit_log_curve(points[model]);
    } catch (const Error& e) {
      mf.error = e.what();
    }
    table.fits.push_back(std::move(mf));
  }
  return table;
}

std::string TradeoffTable::rows_csv() const {
  std::string out = "model,strategy,param,x,y\n";
  for (const auto& r : rows) {
    out += csv_field(r.model) + "," + std::string(decode::strategy_name(r.strategy)) + "," +
           format_number(r.param) + "," + format_number(r.x) + "," + format_number(r.y) + "\n";
  }
  return out;
}

std::string TradeoffTable::fits_csv() const {
  std::string out = "model,a,b,residual_sum,error\n";
  for (const auto& f : fits) {
    out += csv_field(f.model) + ",";
    if (f.fit) {
      out += format_number(f.fit->a) + "," + format_number(f.fit->b) + "," +
             format_number(f.fit->residual_sum) + ",";
    } else {
      out += ",,," + csv_field(f.error);
    }
    out += "\n";
  }
  return out;
}

}  // namespace lmeval::harness
