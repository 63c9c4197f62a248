#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmeval/adapter.hpp"
#include "lmeval/consistency.hpp"
#include "lmeval/corpus.hpp"
#include "lmeval/decode.hpp"
#include "lmeval/error.hpp"
#include "lmeval/ffn.hpp"
#include "lmeval/harness.hpp"
#include "lmeval/io.hpp"
#include "lmeval/lm.hpp"
#include "lmeval/metrics.hpp"
#include "lmeval/train.hpp"

namespace py = pybind11;
using namespace lmeval;

namespace {

using Ids = std::vector<TokenId>;
using IdsList = std::vector<Ids>;

SampleSet as_set(const IdsList& seqs) { return SampleSet::from_sequences(seqs, "s"); }

std::shared_ptr<Vocab> vocab_from(const std::vector<std::string>& tokens) {
  return std::make_shared<Vocab>(tokens);
}

decode::Transform transform_from(std::optional<std::size_t> top_k, std::optional<double> top_p,
                                 std::optional<double> temperature) {
  const int given = top_k.has_value() + top_p.has_value() + temperature.has_value();
  if (given != 1)
    throw Error(Errc::InvalidArgument, "exactly one of top_k, top_p, temperature is required");
  if (top_k) return decode::TopK{*top_k};
  if (top_p) return decode::TopP{*top_p};
  return decode::Temperature{*temperature};
}

metrics::BleuConfig bleu_config(int max_n, double eps, std::optional<std::size_t> subsample,
                                std::uint64_t subsample_seed) {
  metrics::BleuConfig cfg;
  cfg.max_n = max_n;
  cfg.smoothing_epsilon = eps;
  cfg.reference_subsample = subsample;
  cfg.subsample_seed = subsample_seed;
  cfg.validate();
  return cfg;
}

py::tuple bundle_tuple(io::ModelBundle b) {
  std::shared_ptr<lm::LanguageModel> model(std::move(b.model));
  py::object vocab = py::none();
  if (b.vocab) vocab = py::cast(b.vocab->tokens());
  return py::make_tuple(model, vocab, std::string(corpus::scheme_name(b.scheme)));
}

}  // namespace

PYBIND11_MODULE(_lmeval, m) {
  m.doc() = "Language-model evaluation toolkit: n-gram and feed-forward LMs, decoding, "
            "quality and diversity metrics, and the decoding sweep harness.";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> exc_storage;
  exc_storage.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "LmevalError", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = exc_storage.get_stored();
      py::object inst = type(e.what());
      inst.attr("code") = errc_name(e.code());
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  // --- corpus --------------------------------------------------------------
  m.def(
      "tokenize",
      [](const std::string& text, const std::string& scheme) {
        auto seq = corpus::tokenize(text, corpus::parse_scheme(scheme));
        return py::make_tuple(seq.ids, seq.vocab->tokens());
      },
      py::arg("text"), py::arg("scheme") = "word",
      "Returns (ids, vocab) where vocab lists token surfaces in id order.");
  m.def(
      "encode",
      [](const std::string& text, const std::vector<std::string>& vocab, const std::string& scheme) {
        return corpus::encode(text, corpus::parse_scheme(scheme), *vocab_from(vocab));
      },
      py::arg("text"), py::arg("vocab"), py::arg("scheme") = "word");
  m.def(
      "detokenize",
      [](const Ids& ids, const std::vector<std::string>& vocab, const std::string& scheme) {
        return corpus::detokenize(ids, *vocab_from(vocab), corpus::parse_scheme(scheme));
      },
      py::arg("ids"), py::arg("vocab"), py::arg("scheme") = "word");
  m.def(
      "split_corpus",
      [](const Ids& ids, std::size_t seq_len, std::array<double, 3> ratios) {
        auto s = corpus::split_corpus(ids, seq_len, ratios);
        return py::make_tuple(s.train, s.dev, s.test);
      },
      py::arg("ids"), py::arg("seq_len"), py::arg("ratios") = std::array<double, 3>{0.8, 0.1, 0.1});
  m.def("segment_sentences", &corpus::segment_sentences, py::arg("text"));

  // --- language models -----------------------------------------------------
  py::class_<lm::LanguageModel, std::shared_ptr<lm::LanguageModel>>(m, "LanguageModel")
      .def_property_readonly("backend", &lm::LanguageModel::backend)
      .def_property_readonly("vocab_size", &lm::LanguageModel::vocab_size)
      .def(
          "next_dist", [](const lm::LanguageModel& lm, const Ids& ctx) { return lm.next_dist(ctx); },
          py::arg("context"))
      .def(
          "score",
          [](const lm::LanguageModel& lm, const Ids& seq, const Ids& ctx) {
            return lm.score(seq, ctx);
          },
          py::arg("seq"), py::arg("context") = Ids{}, "Sum of natural-log token probabilities.");

  py::class_<lm::NGramLM, lm::LanguageModel, std::shared_ptr<lm::NGramLM>>(m, "NGramLM")
      .def_static(
          "fit",
          [](const IdsList& train, std::size_t vocab_size, int order, double k_s) {
            return std::make_shared<lm::NGramLM>(lm::NGramLM::fit(train, vocab_size, order, k_s));
          },
          py::arg("train"), py::arg("vocab_size"), py::arg("order"), py::arg("k_s") = 0.0)
      .def_property_readonly("order", &lm::NGramLM::order)
      .def_property_readonly("k_s", &lm::NGramLM::smoothing)
      .def(
          "prob",
          [](const lm::NGramLM& lm, const Ids& history, TokenId token) {
            return lm.prob(history, token);
          },
          py::arg("history"), py::arg("token"));

  py::class_<lm::FeedForwardLM, lm::LanguageModel, std::shared_ptr<lm::FeedForwardLM>>(
      m, "FeedForwardLM")
      .def(py::init([](std::size_t vocab_size, std::size_t context, std::size_t embed,
                       std::size_t hidden, std::uint64_t seed) {
             lm::FfnDims d;
             d.vocab_size = vocab_size;
             d.context = context;
             d.embed = embed;
             d.hidden = hidden;
             return std::make_shared<lm::FeedForwardLM>(lm::FeedForwardLM::init(d, seed));
           }),
           py::arg("vocab_size"), py::arg("context") = 8, py::arg("embed") = 32,
           py::arg("hidden") = 64, py::arg("seed") = 0)
      .def_property_readonly("param_count",
                             [](const lm::FeedForwardLM& f) { return f.param_count(); })
      .def_property_readonly("context", [](const lm::FeedForwardLM& f) { return f.dims().context; })
      .def(
          "train",
          [](lm::FeedForwardLM& model, const IdsList& sequences,
             const std::map<std::string, double>& objectives, int epochs, double learning_rate,
             std::size_t batch_size, std::uint64_t seed) {
            losses::TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = learning_rate;
            cfg.batch_size = batch_size;
            cfg.seed = seed;
            cfg.objectives.clear();
            for (const auto& [name, w] : objectives)
              cfg.objectives.emplace_back(losses::parse_objective(name), w);
            losses::TrainData data;
            for (const auto& s : sequences) data.items.push_back({s, {}, {}});
            std::vector<double> totals;
            {
              py::gil_scoped_release release;
              for (const auto& r : losses::train(model, data, cfg)) totals.push_back(r.total);
            }
            return totals;
          },
          py::arg("sequences"), py::arg("objectives") = std::map<std::string, double>{{"mle", 1.0}},
          py::arg("epochs") = 4, py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 16,
          py::arg("seed") = 0, "Trains in place and returns the total loss of every step.");

  m.def("perplexity",
        [](const lm::LanguageModel& lm, const Ids& seq, const Ids& ctx) {
          return lm::perplexity(lm, seq, ctx);
        },
        py::arg("model"), py::arg("seq"), py::arg("context") = Ids{});

  m.def(
      "save_model",
      [](const std::filesystem::path& path, const lm::LanguageModel& model,
         std::optional<std::vector<std::string>> vocab, const std::string& scheme) {
        std::shared_ptr<Vocab> v;
        if (vocab) v = vocab_from(*vocab);
        io::save_model(path, model, v.get(), corpus::parse_scheme(scheme));
      },
      py::arg("path"), py::arg("model"), py::arg("vocab") = std::nullopt,
      py::arg("scheme") = "word");
  m.def(
      "load_model", [](const std::filesystem::path& path) { return bundle_tuple(io::load_model(path)); },
      py::arg("path"), "Returns (model, vocab or None, scheme).");
  m.def(
      "write_ids",
      [](const std::filesystem::path& path, const IdsList& seqs, std::size_t vocab_size) {
        io::write_ids(path, io::IdFile{vocab_size, seqs});
      },
      py::arg("path"), py::arg("sequences"), py::arg("vocab_size"));
  m.def(
      "read_ids",
      [](const std::filesystem::path& path) {
        auto f = io::read_ids(path);
        return py::make_tuple(f.sequences, f.vocab_size);
      },
      py::arg("path"), "Returns (sequences, vocab_size).");
  m.def(
      "open_model", [](const std::string& spec) { return bundle_tuple(lm::open_model(spec)); },
      py::arg("spec"), "Opens a model file or an exec:<command> / tcp:<host>:<port> adapter.");

  // --- decoding ------------------------------------------------------------
  m.def(
      "truncate_renormalize",
      [](const std::vector<double>& dist, std::optional<std::size_t> top_k,
         std::optional<double> top_p, std::optional<double> temperature) {
        return decode::truncate_renormalize(dist, transform_from(top_k, top_p, temperature));
      },
      py::arg("dist"), py::kw_only(), py::arg("top_k") = std::nullopt,
      py::arg("top_p") = std::nullopt, py::arg("temperature") = std::nullopt);
  m.def(
      "penalize",
      [](const std::vector<double>& dist, const Ids& generated, double theta) {
        return decode::penalize(dist, generated, theta);
      },
      py::arg("dist"), py::arg("generated"), py::arg("theta"));
  m.def(
      "generate",
      [](const lm::LanguageModel& model, const Ids& prefix, const std::string& strategy,
         std::optional<double> param, std::uint64_t seed, std::size_t max_len) {
        auto cfg = decode::DecoderConfig::make(decode::parse_strategy(strategy), param, seed, max_len);
        py::gil_scoped_release release;
        return decode::generate(model, prefix, cfg);
      },
      py::arg("model"), py::arg("prefix"), py::arg("strategy") = "greedy",
      py::arg("param") = std::nullopt, py::arg("seed") = 0, py::arg("max_len") = 50,
      "Continuation only (the prefix is not repeated). `param` is b, t, k, p or theta.");

  // --- metrics -------------------------------------------------------------
  m.def(
      "bleu",
      [](const Ids& cand, const IdsList& refs, int max_n, double eps) {
        std::vector<TokenSpan> spans(refs.begin(), refs.end());
        return metrics::bleu(cand, spans, bleu_config(max_n, eps, std::nullopt, 0));
      },
      py::arg("candidate"), py::arg("references"), py::arg("max_n") = 4,
      py::arg("epsilon") = 1e-9);
  m.def(
      "corpus_bleu",
      [](const IdsList& gen, const IdsList& refs, int max_n, double eps) {
        return metrics::corpus_bleu(as_set(gen), as_set(refs),
                                    bleu_config(max_n, eps, std::nullopt, 0));
      },
      py::arg("generated"), py::arg("references"), py::arg("max_n") = 4,
      py::arg("epsilon") = 1e-9);
  m.def(
      "self_bleu",
      [](const IdsList& gen, int max_n, double eps, std::optional<std::size_t> subsample,
         std::uint64_t seed) {
        return metrics::self_bleu(as_set(gen), bleu_config(max_n, eps, subsample, seed));
      },
      py::arg("generated"), py::arg("max_n") = 4, py::arg("epsilon") = 1e-9,
      py::arg("subsample") = std::nullopt, py::arg("subsample_seed") = 0);
  m.def(
      "seq_rep_n", [](const Ids& seq, int n) { return metrics::seq_rep_n(seq, n); },
      py::arg("seq"), py::arg("n") = 4, "None when the sequence has no n-grams.");
  m.def(
      "forward_ppl",
      [](const lm::LanguageModel& scorer, const IdsList& gen) {
        return metrics::forward_ppl(scorer, as_set(gen));
      },
      py::arg("scorer"), py::arg("generated"));
  m.def(
      "reverse_ppl",
      [](const IdsList& gen, const IdsList& human, std::size_t vocab_size, int order, double k_s) {
        metrics::ReversePplConfig cfg{vocab_size, order, k_s};
        return metrics::reverse_ppl(as_set(gen), as_set(human), cfg);
      },
      py::arg("generated"), py::arg("human"), py::arg("vocab_size"), py::arg("order") = 2,
      py::arg("k_s") = 1.0);

  // --- consistency ---------------------------------------------------------
  m.def("ends_with_terminal_punct", &consistency::ends_with_terminal_punct, py::arg("sentence"));
  m.def(
      "selection_accuracy",
      [](const lm::LanguageModel& model, const std::vector<std::tuple<Ids, Ids, Ids>>& items) {
        std::vector<consistency::SelectionItem> sel;
        for (const auto& [ctx, good, bad] : items) sel.push_back({ctx, good, bad});
        auto r = consistency::selection_accuracy(model, sel);
        py::list per;
        for (const auto& it : r.per_item)
          per.append(py::make_tuple(it.ppl_correct, it.ppl_wrong,
                                    std::string(consistency::pick_name(it.picked))));
        py::dict out;
        out["accuracy"] = r.accuracy;
        out["n"] = r.n;
        out["ties"] = r.ties;
        out["per_item"] = per;
        return out;
      },
      py::arg("model"), py::arg("items"),
      "items are (context, correct, wrong) id lists; returns accuracy, n, ties, per_item.");

  // --- harness -------------------------------------------------------------
  m.def(
      "run_sweep_json",
      [](const std::string& config_json) {
        auto cfg = harness::sweep_config_from_json(config_json);
        harness::SweepResult res;
        {
          py::gil_scoped_release release;
          res = harness::run_sweep(cfg);
        }
        std::vector<std::string> lines;
        for (const auto& r : res.records) lines.push_back(harness::record_json(r));
        return py::make_tuple(lines, res.computed, res.reused);
      },
      py::arg("config_json"));
  m.def(
      "fit_log_curve",
      [](const std::vector<std::pair<double, double>>& points) {
        auto f = harness::fit_log_curve(points);
        return py::make_tuple(f.a, f.b, f.residual_sum);
      },
      py::arg("points"), "Least squares y = a ln x + b; returns (a, b, residual_sum).");
}
