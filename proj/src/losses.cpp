#include "lmeval/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "lmeval/error.hpp"

namespace lmeval::losses {

namespace {

TokenSpan prefix_of(TokenSpan seq, std::size_t len) { return seq.first(len); }

bool want_grad(std::span<double> grad) { return !grad.empty(); }

void check_grad_size(const FeedForwardLM& model, std::span<double> grad) {
  if (!grad.empty() && grad.size() != model.param_count()) {
    throw Error(Errc::InvalidArgument, "gradient buffer size does not match the model");
  }
}

}  // namespace

LossAndGrad with_grad(const FeedForwardLM& model,
                      const std::function<double(std::span<double>)>& fn) {
  LossAndGrad out;
  out.grad.assign(model.param_count(), 0.0);
  out.loss = fn(out.grad);
  return out;
}

double mean_nll(const FeedForwardLM& model, TokenSpan seq, std::size_t from,
                std::span<double> grad, double weight) {
  check_grad_size(model, grad);
  if (from >= seq.size()) throw Error(Errc::InvalidArgument, "no positions to score");
  check_ids(seq, model.vocab_size());
  const double count = static_cast<double>(seq.size() - from);
  std::vector<double> d_hidden(model.dims().hidden);
  double total = 0.0;
  for (std::size_t t = from; t < seq.size(); ++t) {
    const auto act = model.forward(prefix_of(seq, t));
    auto probs = model.lm_probs(act);
    total -= std::log(probs[seq[t]]);
    if (want_grad(grad)) {
      // d(-ln p_y)/dlogits = probs - onehot(y)
      probs[seq[t]] -= 1.0;
      for (double& g : probs) g *= weight / count;
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      model.backward_lm(act, probs, grad, d_hidden);
      model.backward_hidden(act, d_hidden, grad);
    }
  }
  return total / count;
}

double ce_loss(const FeedForwardLM& model, TokenSpan seq, std::span<double> grad, double weight) {
  if (seq.size() <= model.dims().context) {
    throw Error(Errc::InvalidArgument, "sequence must be longer than the context window");
  }
  return mean_nll(model, seq, 1, grad, weight);
}

NegativeCandidates token_candidates(TokenSpan seq) {
  NegativeCandidates cands(seq.size());
  std::vector<TokenId> seen;
  std::unordered_set<TokenId> seen_set;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (TokenId c : seen) {
      if (c != seq[t]) cands[t].push_back(c);
    }
    if (seen_set.insert(seq[t]).second) seen.push_back(seq[t]);
  }
  return cands;
}

namespace {

double unlikelihood(const FeedForwardLM& model, TokenSpan seq, const NegativeCandidates& cands,
                    std::span<double> grad, double weight, std::size_t from, bool allow_target) {
  check_grad_size(model, grad);
  if (cands.size() != seq.size()) {
    throw Error(Errc::InvalidArgument, "candidate sets must align with sequence positions");
  }
  if (from >= seq.size()) throw Error(Errc::InvalidArgument, "no positions to score");
  check_ids(seq, model.vocab_size());
  const double count = static_cast<double>(seq.size() - from);
  const double cap = 1.0 - kUnlikelihoodEps;
  std::vector<double> d_hidden(model.dims().hidden);
  std::vector<double> d_logits;
  double total = 0.0;
  for (std::size_t t = from; t < seq.size(); ++t) {
    const auto& cset = cands[t];
    if (cset.empty()) continue;
    for (TokenId c : cset) {
      if (c >= model.vocab_size()) throw Error(Errc::InvalidArgument, "candidate id out of range");
      if (!allow_target && c == seq[t]) {
        throw Error(Errc::InvalidArgument, "candidate set contains the target token");
      }
    }
    const auto act = model.forward(prefix_of(seq, t));
    const auto probs = model.lm_probs(act);
    if (want_grad(grad)) d_logits.assign(probs.size(), 0.0);
    for (TokenId c : cset) {
      const double pc = probs[c];
      if (pc >= cap) {
        total -= std::log1p(-cap);
        continue;  // clamped: locally constant
      }
      total -= std::log1p(-pc);
      if (want_grad(grad)) {
        // d(-ln(1 - p_c))/dlogit_j = p_c (delta_cj - p_j) / (1 - p_c)
        const double s = pc / (1.0 - pc);
        for (std::size_t j = 0; j < probs.size(); ++j) d_logits[j] -= s * probs[j];
        d_logits[c] += s;
      }
    }
    if (want_grad(grad)) {
      for (double& g : d_logits) g *= weight / count;
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      model.backward_lm(act, d_logits, grad, d_hidden);
      model.backward_hidden(act, d_hidden, grad);
    }
  }
  return total / count;
}

}  // namespace

double ul_token_loss(const FeedForwardLM& model, TokenSpan seq, const NegativeCandidates& cands,
                     std::span<double> grad, double weight, std::size_t from) {
  return unlikelihood(model, seq, cands, grad, weight, from, false);
}

double ul_sequence_loss(const FeedForwardLM& model, TokenSpan seq, const NegativeCandidates& cands,
                        std::span<double> grad, double weight, std::size_t from) {
  return unlikelihood(model, seq, cands, grad, weight, from, true);
}

NegativeCandidates ul_seq_candidates(TokenSpan continuation, int n) {
  if (n < 1) throw Error(Errc::BadOrder, "n-gram order must be >= 1");
  const auto order = static_cast<std::size_t>(n);
  NegativeCandidates cands(continuation.size());
  std::unordered_set<std::vector<TokenId>, corpus::NgramHash> seen;
  for (std::size_t t = order - 1; t < continuation.size(); ++t) {
    std::vector<TokenId> gram(continuation.begin() + static_cast<std::ptrdiff_t>(t + 1 - order),
                              continuation.begin() + static_cast<std::ptrdiff_t>(t + 1));
    if (!seen.insert(std::move(gram)).second) cands[t].push_back(continuation[t]);
  }
  return cands;
}

MarginResult margin_rank_loss(const FeedForwardLM& model, const corpus::SentencePair& pos,
                              const corpus::SentencePair& neg, double margin,
                              std::span<double> grad, double weight) {
  if (!(margin >= 0.0)) throw Error(Errc::ConfigError, "margin must be >= 0");
  auto joined = [](const corpus::SentencePair& p) {
    if (p.first.empty() || p.second.empty()) {
      throw Error(Errc::InvalidArgument, "sentence pair has an empty sentence");
    }
    std::vector<TokenId> s(p.first);
    s.insert(s.end(), p.second.begin(), p.second.end());
    return s;
  };
  const auto pos_seq = joined(pos);
  const auto neg_seq = joined(neg);
  MarginResult r{};
  r.ppl_pos = std::exp(mean_nll(model, pos_seq, pos.first.size()));
  r.ppl_neg = std::exp(mean_nll(model, neg_seq, neg.first.size()));
  const double hinge = r.ppl_pos - r.ppl_neg + margin;
  r.loss = std::max(0.0, hinge);
  if (hinge > 0.0 && want_grad(grad)) {
    // d ppl = ppl * d mean_nll
    mean_nll(model, pos_seq, pos.first.size(), grad, weight * r.ppl_pos);
    mean_nll(model, neg_seq, neg.first.size(), grad, -weight * r.ppl_neg);
  }
  return r;
}

std::pair<double, double> smooth_l1_loss(double pred, double target) {
  const double x = pred - target;
  if (std::abs(x) < 1.0) return {0.5 * x * x, x};
  return {std::abs(x) - 0.5, x > 0 ? 1.0 : -1.0};
}

double tfidf_loss(const FeedForwardLM& model, TokenSpan seq, std::span<const double> targets,
                  std::span<double> grad, double weight) {
  check_grad_size(model, grad);
  if (targets.size() != seq.size()) throw Error(Errc::InvalidArgument, "targets must align with tokens");
  std::size_t supervised = 0;
  for (double y : targets) supervised += std::isfinite(y) ? 1 : 0;
  if (supervised == 0) throw Error(Errc::NoSupervision, "no finite regression targets");
  const double count = static_cast<double>(supervised);
  std::vector<double> d_hidden(model.dims().hidden);
  double total = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (!std::isfinite(targets[t])) continue;
    const auto act = model.forward(prefix_of(seq, t + 1));
    const auto [loss, d_pred] = smooth_l1_loss(model.regression(act), targets[t]);
    total += loss;
    if (want_grad(grad)) {
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      model.backward_regression(act, d_pred * weight / count, grad, d_hidden);
      model.backward_hidden(act, d_hidden, grad);
    }
  }
  return total / count;
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty() || names_.front() != "X") names_.insert(names_.begin(), "X");
}

int LabelSet::intern(const std::string& name) {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it != names_.end()) return static_cast<int>(it - names_.begin());
  names_.push_back(name);
  return static_cast<int>(names_.size() - 1);
}

int LabelSet::id(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(Errc::InvalidArgument, "unknown label '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

const std::string& LabelSet::name(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw Error(Errc::InvalidArgument, "label id out of range");
  }
  return names_[static_cast<std::size_t>(id)];
}

namespace {

std::string strip_space(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
  }
  return out;
}

std::string strip_marker(std::string_view s) {
  const auto first = s.find_first_not_of('#');
  if (first == std::string_view::npos) return std::string(s);  // token made only of '#'
  return std::string(s.substr(first));
}

}  // namespace

std::vector<int> align_labels(std::span<const WordLabel> words,
                              std::span<const std::string> model_tokens, LabelSet& labels) {
  std::string word_stream;
  std::vector<std::size_t> word_start, word_end;
  for (const auto& w : words) {
    const auto s = strip_space(w.surface);
    word_start.push_back(word_stream.size());
    word_stream += s;
    word_end.push_back(word_stream.size());
  }
  std::string token_stream;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& tok : model_tokens) {
    const auto s = strip_marker(strip_space(tok));
    spans.emplace_back(token_stream.size(), token_stream.size() + s.size());
    token_stream += s;
  }
  if (word_stream != token_stream) {
    throw Error(Errc::AlignmentError, "word surfaces '" + word_stream +
                                          "' do not match model tokens '" + token_stream + "'");
  }

  std::vector<int> out;
  out.reserve(model_tokens.size());
  std::size_t w = 0;
  for (const auto& [begin, end] : spans) {
    while (w < words.size() && word_end[w] <= begin) ++w;
    const bool aligned = begin < end && w < words.size() && word_start[w] == begin && end <= word_end[w];
    if (!aligned) {
      out.push_back(LabelSet::kX);
    } else {
      out.push_back(words[w].label.empty() ? LabelSet::kUnlabeled : labels.intern(words[w].label));
    }
  }
  return out;
}

double classification_loss(const FeedForwardLM& model, TokenSpan seq, std::span<const int> labels,
                           std::span<double> grad, double weight) {
  check_grad_size(model, grad);
  if (labels.size() != seq.size()) throw Error(Errc::InvalidArgument, "labels must align with tokens");
  const auto n_labels = static_cast<int>(model.dims().n_labels);
  std::size_t supervised = 0;
  for (int l : labels) {
    if (l >= n_labels) throw Error(Errc::InvalidArgument, "label id exceeds the classification head");
    if (l > LabelSet::kX) ++supervised;
  }
  if (supervised == 0) throw Error(Errc::NoSupervision, "every position is masked");
  const double count = static_cast<double>(supervised);
  std::vector<double> d_hidden(model.dims().hidden);
  double total = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (labels[t] <= LabelSet::kX) continue;
    const auto act = model.forward(prefix_of(seq, t + 1));
    auto q = model.label_probs(act);
    const auto y = static_cast<std::size_t>(labels[t]);
    total -= std::log(q[y]);
    if (want_grad(grad)) {
      q[y] -= 1.0;
      for (double& g : q) g *= weight / count;
      std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
      model.backward_labels(act, q, grad, d_hidden);
      model.backward_hidden(act, d_hidden, grad);
    }
  }
  return total / count;
}

GradCheckResult grad_check(const FeedForwardLM& model, const LossFn& loss, double tolerance) {
  constexpr double kStep = 1e-5;
  std::vector<double> analytic(model.param_count(), 0.0);
  loss(model, analytic);

  FeedForwardLM probe = model;
  auto params = probe.params();
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + kStep;
    const double up = loss(probe, {});
    params[i] = orig - kStep;
    const double down = loss(probe, {});
    params[i] = orig;
    const double numeric = (up - down) / (2.0 * kStep);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = i;
    }
  }
  result.passed = result.max_rel_error < tolerance;
  return result;
}

}  // namespace lmeval::losses
