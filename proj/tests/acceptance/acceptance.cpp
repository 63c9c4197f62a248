// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each check is self-contained and deterministic.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lmeval/consistency.hpp"
#include "lmeval/corpus.hpp"
#include "lmeval/decode.hpp"
#include "lmeval/ffn.hpp"
#include "lmeval/harness.hpp"
#include "lmeval/io.hpp"
#include "lmeval/losses.hpp"
#include "lmeval/metrics.hpp"
#include "lmeval/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace lmeval;
namespace fs = std::filesystem;
using decode::DecoderConfig;
using decode::Strategy;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<TokenId> random_seq(SplitMix64& rng, std::size_t min_len, std::size_t max_len, std::size_t v) {
  std::vector<TokenId> s(min_len + rng.below(max_len - min_len + 1));
  for (auto& t : s) t = static_cast<TokenId>(rng.below(v));
  return s;
}

// --- 1 ---------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  SplitMix64 rng(2024);
  std::size_t bleu_bad = 0, rep_bad = 0, gram_bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    metrics::BleuConfig cfg;
    cfg.max_n = 1 + static_cast<int>(rng.below(4));
    const std::size_t v = 2 + rng.below(6);
    const auto cand = random_seq(rng, 1, 15, v);
    std::vector<std::vector<TokenId>> refs(1 + rng.below(4));
    for (auto& r : refs) r = random_seq(rng, 1, 15, v);
    const double want = oracle::bleu(cand, refs, cfg.max_n, cfg.smoothing_epsilon);
    const double got = metrics::bleu(cand, {refs.begin(), refs.end()}, cfg);
    worst = std::max(worst, std::abs(got - want));
    if (!(std::abs(got - want) <= 1e-9)) ++bleu_bad;
  }
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_seq(rng, 1, 40, 1 + rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(4));
    const auto got = metrics::seq_rep_n(s, n);
    if (s.size() < static_cast<std::size_t>(n)) {
      if (got) ++rep_bad;
    } else if (!got || *got != oracle::seq_rep(s, static_cast<std::size_t>(n))) {
      ++rep_bad;
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_seq(rng, 0, 30, 1 + rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(5));
    const auto got = corpus::extract_ngrams(s, n);
    const auto want = oracle::ngram_counts(s, static_cast<std::size_t>(n));
    std::map<oracle::Gram, std::size_t> as_map(got.begin(), got.end());
    if (as_map != want) ++gram_bad;
  }
  const double secs = seconds_since(t0);
  return {bleu_bad == 0 && rep_bad == 0 && gram_bad == 0 && secs < 30.0,
          "1000 cases each; mismatches bleu=" + std::to_string(bleu_bad) + " (max |diff| " +
              std::to_string(worst) + ") seq_rep=" + std::to_string(rep_bad) +
              " ngrams=" + std::to_string(gram_bad) + "; " + fmt(secs, 2) + " s"};
}

// --- 2 ---------------------------------------------------------------------

Outcome bleu_hand_case() {
  Vocab v;
  auto enc = [&](std::string_view text) {
    std::vector<TokenId> ids;
    for (const auto& t : corpus::split_tokens(text, corpus::Scheme::Word)) ids.push_back(v.add(t));
    return ids;
  };
  const auto ref = enc("the cat sat on the mat");
  const auto cand = enc("the cat sat");
  metrics::BleuConfig cfg;
  cfg.max_n = 2;
  const double b = metrics::bleu(cand, {ref}, cfg);
  return {std::abs(b - 0.3679) <= 1e-4, "BLEU = " + fmt(b, 6) + " (expected 0.3679)"};
}

// --- 3 ---------------------------------------------------------------------

Outcome sampler_identities() {
  SplitMix64 rng(31337);
  int topk = 0, beam = 0, topp = 0, temp = 0;
  for (int i = 0; i < 100; ++i) {
    lm::FfnDims dims{2 + rng.below(12), 1 + rng.below(4), 2 + rng.below(6), 2 + rng.below(10)};
    auto model = lm::FeedForwardLM::init(dims, rng.next());
    // sharpen the output layer so distributions are far from uniform
    for (std::size_t j = dims.vocab_size; j-- > 0;) model.params()[model.layout().b_out + j] = 3.0 * rng.uniform();
    for (std::size_t j = model.layout().w_out; j < model.layout().b_out; ++j) model.params()[j] *= 20.0;
    const auto prefix = random_seq(rng, 1, 6, dims.vocab_size);
    const auto seed = rng.next();
    const std::size_t len = 1 + rng.below(25);

    const auto greedy = decode::generate(model, prefix, DecoderConfig::make(Strategy::Greedy, std::nullopt, seed, len));
    topk += decode::generate(model, prefix, DecoderConfig::make(Strategy::TopK, 1, seed, len)) == greedy;
    beam += decode::generate(model, prefix, DecoderConfig::make(Strategy::Beam, 1, seed, len)) == greedy;

    // unrestricted ancestral sampling, written out by hand
    SplitMix64 s(seed);
    std::vector<TokenId> hist(prefix), manual;
    bool identity = true;
    for (std::size_t t = 0; t < len; ++t) {
      const auto dist = model.next_dist(hist);
      identity = identity && decode::truncate_renormalize(dist, decode::Temperature{1.0}) == dist &&
                 decode::truncate_renormalize(dist, decode::TopP{1.0}) == dist;
      const auto tok = decode::sample(dist, s);
      manual.push_back(tok);
      hist.push_back(tok);
    }
    topp += decode::generate(model, prefix, DecoderConfig::make(Strategy::TopP, 1.0, seed, len)) == manual;
    temp += identity &&
            decode::generate(model, prefix, DecoderConfig::make(Strategy::Temperature, 1.0, seed, len)) == manual;
  }
  return {topk == 100 && beam == 100 && topp == 100 && temp == 100,
          "equal sequences out of 100: topk(1)=" + std::to_string(topk) + " beam(1)=" + std::to_string(beam) +
              " topp(1.0)=" + std::to_string(topp) + " temperature(1)=" + std::to_string(temp)};
}

// --- 4 ---------------------------------------------------------------------

Outcome sampling_statistics() {
  SplitMix64 rng(4);
  const std::vector<double> d{0.7, 0.3};
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += decode::sample(d, rng) == 0;
  const double f = zeros / 10000.0;
  return {std::abs(f - 0.7) <= 0.02, "frequency of token 0 = " + fmt(f)};
}

// --- 5 ---------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  lm::FfnDims dims{7, 2, 4, 5};
  dims.n_labels = 4;
  auto model = lm::FeedForwardLM::init(dims, 5);
  SplitMix64 rng(6);
  for (auto& p : model.params()) p += 0.05 * (rng.uniform() - 0.5);

  const std::vector<TokenId> seq{1, 4, 2, 6, 4, 1, 0, 3, 5};
  const auto cands = losses::token_candidates(seq);
  const std::vector<int> labels{1, 0, 2, 3, -1, 1, 2, 3, 2};
  corpus::SentencePair pos{{1, 2}, {3, 4, 5}, corpus::PairLabel::Positive, corpus::PairMode::SOP};
  corpus::SentencePair neg{{3, 4, 5}, {1, 2}, corpus::PairLabel::Negative, corpus::PairMode::SOP};
  // large margin keeps the hinge in its active region
  const double margin = 100.0;
  const auto active = losses::margin_rank_loss(model, pos, neg, margin);

  // smooth L1 enters through the regression head on both branches of |x| < 1
  lm::FfnDims rdims{7, 2, 4, 5};
  rdims.regression_head = true;
  auto rmodel = lm::FeedForwardLM::init(rdims, 7);
  for (auto& p : rmodel.params()) p += 0.05 * (rng.uniform() - 0.5);
  const std::vector<double> targets{0.3, -0.2, 1.7, 0.05, -2.5, 0.8, 0.1, 3.0, -0.4};

  using losses::FeedForwardLM;
  struct Case {
    const char* name;
    const FeedForwardLM* model;
    losses::LossFn fn;
  };
  const std::vector<Case> cases{
      {"ce_loss", &model, [&](const FeedForwardLM& m, std::span<double> g) { return losses::ce_loss(m, seq, g); }},
      {"ul_token_loss", &model,
       [&](const FeedForwardLM& m, std::span<double> g) { return losses::ul_token_loss(m, seq, cands, g); }},
      {"margin_rank_loss", &model,
       [&](const FeedForwardLM& m, std::span<double> g) { return losses::margin_rank_loss(m, pos, neg, margin, g).loss; }},
      {"smooth_l1_loss", &rmodel,
       [&](const FeedForwardLM& m, std::span<double> g) { return losses::tfidf_loss(m, seq, targets, g); }},
      {"classification_loss", &model,
       [&](const FeedForwardLM& m, std::span<double> g) { return losses::classification_loss(m, seq, labels, g); }},
  };
  bool ok = active.loss > 0.0;
  std::string detail;
  for (const auto& c : cases) {
    const auto r = losses::grad_check(*c.model, c.fn, 1e-4);
    ok = ok && r.passed;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s=%.2e", detail.empty() ? "" : " ", c.name, r.max_rel_error);
    detail += buf;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, "max relative error " + detail + "; " + fmt(secs, 2) + " s"};
}

// --- 6 and 7 share the MLE model ----------------------------------------------

struct DegenerationSetup {
  TokenSequence seq;
  corpus::CorpusSplits splits;
  lm::FfnDims dims;
  losses::TrainData data;

  DegenerationSetup() {
    seq = corpus::tokenize(testing::synthetic_corpus(1400, 7), corpus::Scheme::Char);
    splits = corpus::split_corpus(seq.ids, 64, {0.8, 0.1, 0.1});
    dims.vocab_size = seq.vocab->size();
    dims.context = 24;
    dims.embed = 8;
    dims.hidden = 64;
    for (const auto& s : splits.train) data.items.push_back({s, {}, {}});
  }

  lm::FeedForwardLM train(bool unlikelihood) const {
    auto model = lm::FeedForwardLM::init(dims, 1);
    losses::TrainConfig cfg;
    cfg.epochs = 8;
    cfg.learning_rate = 0.005;
    cfg.batch_size = 16;
    cfg.seed = 3;
    cfg.seq_ul = {0.5, 50, 100, 4};
    if (unlikelihood) cfg.objectives = {{losses::Objective::Mle, 1.0}, {losses::Objective::Unlikelihood, 8.0}};
    losses::train(model, data, cfg);
    return model;
  }

  // Greedy continuations of 100 tokens from the first 50 tokens of each test sequence.
  double greedy_seq_rep4(const lm::LanguageModel& model) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : splits.test) {
      const std::vector<TokenId> prefix(s.begin(), s.begin() + 50);
      const auto c = decode::generate(model, prefix, DecoderConfig::make(Strategy::Greedy, std::nullopt, 0, 100));
      if (const auto r = metrics::seq_rep_n(c, 4)) {
        sum += *r;
        ++n;
      }
    }
    return sum / static_cast<double>(n);
  }
};

struct Shared {
  std::optional<DegenerationSetup> setup;
  std::optional<lm::FeedForwardLM> mle;
};

Outcome degeneration(Shared& shared) {
  const auto t0 = std::chrono::steady_clock::now();
  shared.setup.emplace();
  const auto& setup = *shared.setup;
  shared.mle = setup.train(false);
  const auto ul = setup.train(true);
  const double mle_rep = setup.greedy_seq_rep4(*shared.mle);
  const double ul_rep = setup.greedy_seq_rep4(ul);
  const double secs = seconds_since(t0);
  const bool ok = mle_rep > 0.05 && ul_rep < 0.5 * mle_rep && secs < 600.0 && setup.seq.size() <= 50000 &&
                  setup.dims.vocab_size <= 100;
  return {ok, "corpus " + std::to_string(setup.seq.size()) + " chars, |V|=" + std::to_string(setup.dims.vocab_size) +
                  "; greedy seq-rep-4 MLE=" + fmt(mle_rep) + " MLE+UL=" + fmt(ul_rep) + " (ratio " +
                  fmt(ul_rep / mle_rep, 3) + "); " + fmt(secs, 1) + " s"};
}

std::size_t inversions(const std::vector<double>& values) {
  // values are listed in order of increasing randomness and should fall
  std::size_t inv = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) inv += values[j] >= values[i];
  }
  return inv;
}

Outcome tradeoff_direction(Shared& shared) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!shared.mle) return {false, "MLE model unavailable (criterion 6 did not finish)"};
  const auto& setup = *shared.setup;
  testing::TempDir dir("tradeoff");

  // 80-token windows of training text: 20-token prefix and 60-token human continuation
  std::vector<TokenId> stream;
  for (const auto& s : setup.splits.train) stream.insert(stream.end(), s.begin(), s.end());
  io::IdFile windows{setup.dims.vocab_size, {}};
  for (std::size_t i = 0; i + 80 <= stream.size() && windows.sequences.size() < 100; i += 150) {
    windows.sequences.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(i),
                                   stream.begin() + static_cast<std::ptrdiff_t>(i + 80));
  }
  io::write_ids(dir / "windows.ids", windows);
  io::save_model(dir / "mle.lmek", *shared.mle, setup.seq.vocab.get(), corpus::Scheme::Char);

  harness::SweepConfig cfg;
  cfg.models = {(dir / "mle.lmek").string()};
  cfg.strategies = {{Strategy::TopP, {0.2, 0.4, 0.6, 0.8, 0.9}}, {Strategy::TopK, {2, 10, 50}}};
  cfg.prefix_len = 20;
  cfg.gen_len = 60;
  cfg.seed = 1000;
  cfg.metrics = {harness::MetricKind::CorpusBleu, harness::MetricKind::SelfBleu};
  cfg.train_ids = dir / "windows.ids";
  cfg.out_dir = dir / "sweep";
  cfg.workers = 4;
  const auto result = harness::run_sweep(cfg);

  std::vector<double> self_p, self_k, corp_p, corp_k;
  std::string detail;
  for (const auto& r : result.records) {
    if (r.failed) return {false, "cell failed: " + r.error};
    const double sb = *r.metrics.at("self_bleu");
    const double cb = *r.metrics.at("corpus_bleu");
    (r.strategy == Strategy::TopP ? self_p : self_k).push_back(sb);
    (r.strategy == Strategy::TopP ? corp_p : corp_k).push_back(cb);
    detail += std::string(decode::strategy_name(r.strategy)) + "=" + harness::format_number(r.param) + ": self " +
              fmt(sb) + " corpus " + fmt(cb) + "; ";
  }
  const std::size_t self_inv = inversions(self_p) + inversions(self_k);
  const std::size_t corp_inv = inversions(corp_p) + inversions(corp_k);
  const double secs = seconds_since(t0);
  return {self_inv <= 1 && corp_inv <= 1 && secs < 600.0,
          std::to_string(result.records.front().n_samples) + " samples per cell; " + detail +
              "pairwise inversions Self-BLEU=" + std::to_string(self_inv) +
              " Corpus-BLEU=" + std::to_string(corp_inv) + "; " + fmt(secs, 1) + " s"};
}

// --- 8 ---------------------------------------------------------------------

Outcome reverse_ppl_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto text = testing::synthetic_corpus(400, 11);
  const auto sentences = corpus::segment_sentences(text);
  Vocab vocab;
  std::vector<std::vector<TokenId>> encoded;
  for (const auto& s : sentences) {
    std::vector<TokenId> ids;
    for (const auto& t : corpus::split_tokens(s, corpus::Scheme::Word)) ids.push_back(vocab.add(t));
    encoded.push_back(std::move(ids));
  }
  std::vector<std::vector<TokenId>> distinct(encoded.begin(), encoded.begin() + 100);
  std::vector<std::vector<TokenId>> repeated(100, encoded[0]);
  std::vector<std::vector<TokenId>> held_out(encoded.begin() + 300, encoded.end());
  const metrics::ReversePplConfig cfg{vocab.size(), 2, 1.0};
  const auto human = SampleSet::from_sequences(held_out, "human");
  const double rep = metrics::reverse_ppl(SampleSet::from_sequences(repeated), human, cfg);
  const double div = metrics::reverse_ppl(SampleSet::from_sequences(distinct), human, cfg);
  const double secs = seconds_since(t0);
  return {rep > div && secs < 60.0, "reverse ppl on " + std::to_string(held_out.size()) +
                                        " held-out sentences: repeated=" + fmt(rep, 2) + " distinct=" + fmt(div, 2)};
}

// --- 9 ---------------------------------------------------------------------

Outcome selection_oracle() {
  static const char* subjects[] = {"The baker", "A pilot", "My uncle", "The nurse", "Our cat",
                                   "The mayor", "A farmer", "The poet", "Her sister", "The guard"};
  static const char* verbs[] = {"opened the door", "lost a key", "painted the fence", "climbed the hill"};
  std::vector<consistency::NliTriple> triples;
  for (int i = 0; i < 20; ++i) {
    const std::string subj = subjects[i % 10];
    const std::string verb = verbs[(i / 10 + i) % 4];
    triples.push_back({subj + " " + verb + " at " + std::to_string(i) + " o'clock.",
                       "So " + subj + " was awake " + std::to_string(i) + ".",
                       "So " + std::string(subjects[(i + 3) % 10]) + " was asleep " + std::to_string(i + 7) + "."});
  }
  Vocab vocab;
  for (const auto& t : triples) {
    for (const auto* s : {&t.context, &t.entailed, &t.contradicting}) {
      for (const auto& tok : corpus::split_tokens(*s, corpus::Scheme::Word)) vocab.add(tok);
    }
  }
  auto enc = [&](std::string_view s) { return corpus::encode(s, corpus::Scheme::Word, vocab); };
  // the scorer memorizes each context followed by its entailed sentence
  std::vector<std::vector<TokenId>> train;
  for (const auto& t : triples) train.push_back(enc(t.context + " " + t.entailed));
  const auto scorer = lm::NGramLM::fit(train, vocab.size(), 4, 0.01);

  const auto items = consistency::prepare(triples, enc);
  const auto r = consistency::selection_accuracy(scorer, items);
  auto swapped_triples = triples;
  for (auto& t : swapped_triples) std::swap(t.entailed, t.contradicting);
  const auto s = consistency::selection_accuracy(scorer, consistency::prepare(swapped_triples, enc));
  return {r.accuracy == 1.0 && s.accuracy == 0.0 && r.ties == 0 && s.ties == 0,
          "20 triples: accuracy=" + fmt(r.accuracy, 3) + " swapped=" + fmt(s.accuracy, 3) +
              " ties=" + std::to_string(r.ties + s.ties)};
}

// --- 10 --------------------------------------------------------------------

Outcome log_fit_and_grid() {
  std::vector<std::pair<double, double>> pts;
  for (double x : {0.05, 0.2, 0.5, 1.0, 2.0, 10.0, 50.0, 400.0}) pts.emplace_back(x, 2.0 * std::log(x) + 1.0);
  const auto fit = harness::fit_log_curve(pts);
  const bool fit_ok = std::abs(fit.a - 2.0) <= 1e-9 && std::abs(fit.b - 1.0) <= 1e-9;

  // 3 models x (greedy + 9 top-p + 9 top-k) = 57 cells
  testing::TempDir dir("grid");
  io::IdFile train{10, {}};
  SplitMix64 rng(10);
  for (int i = 0; i < 6; ++i) train.sequences.push_back(random_seq(rng, 12, 12, 10));
  io::write_ids(dir / "train.ids", train);
  harness::SweepConfig cfg;
  for (int m = 0; m < 3; ++m) {
    const auto path = dir / ("m" + std::to_string(m) + ".lmek");
    io::save_model(path, lm::NGramLM::fit(train.sequences, 10, m + 1, 0.5), nullptr, corpus::Scheme::Word);
    cfg.models.push_back(path.string());
  }
  cfg.strategies = {{Strategy::Greedy, {}},
                    {Strategy::TopP, {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.96}},
                    {Strategy::TopK, {1, 2, 3, 4, 5, 6, 7, 8, 9}}};
  cfg.prefix_len = 4;
  cfg.gen_len = 6;
  cfg.metrics = {harness::MetricKind::SelfBleu, harness::MetricKind::SeqRep4};
  cfg.train_ids = dir / "train.ids";
  cfg.out_dir = dir / "sweep";
  cfg.workers = 4;
  const auto cells = harness::enumerate_cells(cfg);
  std::size_t records = 0, failed = 0;
  std::string err;
  try {
    const auto r = harness::run_sweep(cfg);
    records = r.records.size();
    for (const auto& rec : r.records) failed += rec.failed;
  } catch (const std::exception& e) {
    err = e.what();
  }
  return {fit_ok && cells.size() == 57 && records == 57 && failed == 0,
          "fit a=" + harness::format_number(fit.a) + " b=" + harness::format_number(fit.b) + "; grid of " +
              std::to_string(cells.size()) + " cells gave " + std::to_string(records) + " records (" +
              std::to_string(failed) + " failed)" + (err.empty() ? "" : "; error: " + err)};
}

// --- 11 --------------------------------------------------------------------

int run_in(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + LMEVAL_CLI_PATH + "' --config ../pipeline.json " + args +
                          " > /dev/null 2>> ../stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return files;
}

Outcome end_to_end_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::TempDir dir("e2e");
  io::write_text(dir / "corpus.txt", testing::synthetic_corpus(300, 21));
  io::write_text(dir / "pipeline.json", R"({
  "seed": 5,
  "workers": 2,
  "ingest": {"input": "../corpus.txt", "scheme": "char", "seq_len": 64, "ratios": [0.8, 0.1, 0.1]},
  "train": {"backend": "ffn", "context": 8, "embed": 8, "hidden": 16, "epochs": 1, "batch_size": 16,
            "lr": 0.005, "objectives": ["mle:1", "ul:1"], "ul_prefix": 20, "ul_gen": 20},
  "sweep": {"models": ["model.lmek"],
            "strategies": [{"strategy": "greedy"}, {"strategy": "topp", "params": [0.5, 0.9]},
                           {"strategy": "topk", "params": [2, 10]}],
            "prefix_len": 20, "gen_len": 30, "max_prefixes": 20},
  "generate": {"model": "model.lmek", "strategy": "topp", "p": 0.9, "prefix_len": 20, "gen_len": 30,
               "max_prefixes": 15},
  "eval": {"samples": "samples.jsonl", "reference": "test.ids", "scorer_train": "train.ids",
           "human": "test.ids"}
})");
  const std::vector<std::string> steps{"ingest", "train", "sweep", "generate", "eval quality", "eval diversity"};
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run_a", "run_b"}) {
    const auto run_dir = dir / name;
    fs::create_directories(run_dir);
    for (const auto& step : steps) {
      if (const int code = run_in(run_dir, step); code != 0) {
        return {false, std::string(name) + ": '" + step + "' exited with " + std::to_string(code) + ": " +
                           io::read_text(dir / "stderr.txt")};
      }
    }
    runs.push_back(snapshot(run_dir));
  }
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    if (it == runs[1].end() || it->second != bytes) {
      if (first_diff.empty()) first_diff = path;
      ++differing;
    }
  }
  if (runs[0].size() != runs[1].size()) ++differing;
  const bool has_all = runs[0].count("model.lmek") && runs[0].count("sweep.csv") && runs[0].count("records.jsonl") &&
                       runs[0].count("report_corpus_bleu.json") && runs[0].count("report_self_bleu.json");
  return {differing == 0 && has_all,
          std::to_string(runs[0].size()) + " artifacts per run, " + std::to_string(differing) + " differ" +
              (first_diff.empty() ? "" : " (first: " + first_diff + ")") + "; " + fmt(seconds_since(t0), 1) + " s"};
}

}  // namespace

int main() {
  Shared shared;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracles", metric_oracles},
      {"BLEU hand case", bleu_hand_case},
      {"sampler identities", sampler_identities},
      {"sampling statistics", sampling_statistics},
      {"gradient suite", gradient_suite},
      {"degeneration reproduction", [&] { return degeneration(shared); }},
      {"trade-off direction", [&] { return tradeoff_direction(shared); }},
      {"reverse-ppl direction", reverse_ppl_direction},
      {"selection-accuracy oracle", selection_oracle},
      {"log-fit recovery and 57-cell grid", log_fit_and_grid},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
