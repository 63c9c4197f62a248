#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lmeval/decode.hpp"
#include "lmeval/lm.hpp"
#include "lmeval/metrics.hpp"
#include "lmeval/sample_set.hpp"

namespace lmeval::harness {

enum class MetricKind { CorpusBleu, SelfBleu, SeqRep4, ForwardPpl, ReversePpl };

MetricKind parse_metric(std::string_view name);
std::string_view metric_name(MetricKind m) noexcept;
/// Corpus-BLEU is the only higher-is-better quality metric.
bool higher_is_better(std::string_view metric) noexcept;

struct StrategyGrid {
  decode::Strategy strategy = decode::Strategy::Greedy;
  std::vector<double> params;  // ignored for greedy
};

struct SweepConfig {
  std::vector<std::string> models;  // model file paths or exec:/tcp: specs
  std::vector<StrategyGrid> strategies;
  std::size_t prefix_len = 50;
  std::size_t gen_len = 150;
  std::uint64_t seed = 0;
  std::vector<MetricKind> metrics{MetricKind::CorpusBleu, MetricKind::SelfBleu,
                                  MetricKind::SeqRep4, MetricKind::ForwardPpl,
                                  MetricKind::ReversePpl};
  std::filesystem::path train_ids;  // prefixes and their human continuations
  std::filesystem::path test_ids;   // held-out human text for reverse ppl
  std::filesystem::path out_dir;
  std::optional<std::size_t> max_prefixes;
  metrics::BleuConfig bleu;
  std::string scorer;  // forward-ppl scorer spec; empty = n-gram fit on train
  int scorer_order = 3;
  double scorer_k_s = 1.0;
  int reverse_order = 2;
  double reverse_k_s = 1.0;
  std::size_t workers = 1;

  /// Throws ConfigError on missing inputs or out-of-range values.
  void validate() const;
};

/// Parses a JSON sweep configuration. Unknown keys are rejected.
SweepConfig sweep_config_from_json(const std::string& text);

struct Cell {
  std::size_t model_index = 0;
  std::string model;
  decode::Strategy strategy = decode::Strategy::Greedy;
  std::optional<double> param;
};

/// Grid order: models, then strategies, then params as listed.
std::vector<Cell> enumerate_cells(const SweepConfig& cfg);

/// seed XOR fnv1a64("model|strategy|param|index"), mixed through SplitMix64.
std::uint64_t sample_seed(std::uint64_t seed, const Cell& cell, std::size_t index);

struct SweepRecord {
  std::string model;
  decode::Strategy strategy = decode::Strategy::Greedy;
  std::optional<double> param;
  std::map<std::string, std::optional<double>> metrics;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::string cell_hash;
  std::string samples_file;  // relative to out_dir
  std::string samples_hash;
};

std::string record_json(const SweepRecord& r);
SweepRecord parse_record(const std::string& line);
std::vector<SweepRecord> read_records(const std::filesystem::path& path);

/// Header `model,strategy,param,n_samples,corpus_bleu,self_bleu,seq_rep_4,
/// forward_ppl,reverse_ppl,seed,schema`; nulls are empty fields and every
/// row carries schema `v1`.
std::string sweep_csv(const std::vector<SweepRecord>& records);

struct SweepResult {
  std::vector<SweepRecord> records;
  std::size_t computed = 0;
  std::size_t reused = 0;
};

/// Runs every cell of the grid on a bounded worker pool. Each cell writes
/// `samples/<key>.jsonl` and `cells/<key>.json` under out_dir; records.jsonl
/// and sweep.csv are written once at the end in grid order. A cell whose
/// stored record has the same content hash (and intact samples file) is
/// reused instead of recomputed. Model failures become failed records.
SweepResult run_sweep(const SweepConfig& cfg);

/// Inputs shared by every metric evaluation.
struct MetricInputs {
  const SampleSet* reference = nullptr;   // Corpus-BLEU references
  const SampleSet* human_test = nullptr;  // reverse-ppl targets
  const lm::LanguageModel* scorer = nullptr;
  metrics::BleuConfig bleu;
  metrics::ReversePplConfig reverse;
};

/// Computes one metric; non-finite or undefined values come back as nullopt.
std::optional<double> evaluate_metric(MetricKind kind, const SampleSet& gen, const MetricInputs& in);

// --- curve fitting ---------------------------------------------------------

struct LogFit {
  double a = 0.0;
  double b = 0.0;
  double residual_sum = 0.0;
};

/// Least squares y = a ln x + b. Throws InvalidArgument for x <= 0 and
/// DegenerateFit for fewer than 2 distinct x values.
LogFit fit_log_curve(const std::vector<std::pair<double, double>>& points);

struct TradeoffRow {
  std::string model;
  decode::Strategy strategy = decode::Strategy::Greedy;
  std::optional<double> param;
  std::optional<double> x;  // diversity value
  std::optional<double> y;  // quality value, negated when higher is better
};

struct ModelFit {
  std::string model;
  std::optional<LogFit> fit;
  std::string error;
};

struct TradeoffTable {
  std::vector<TradeoffRow> rows;
  std::vector<ModelFit> fits;

  std::string rows_csv() const;
  std::string fits_csv() const;
};

TradeoffTable tradeoff_table(const std::vector<SweepRecord>& records,
                             std::string_view quality_metric, std::string_view diversity_metric);

/// Shortest round-trip decimal form; "" for nullopt.
std::string format_number(std::optional<double> v);

}  // namespace lmeval::harness
