#include "lmeval/ffn.hpp"

#include <algorithm>
#include <cmath>

#include "lmeval/error.hpp"
#include "lmeval/rng.hpp"

namespace lmeval::lm {

namespace {

void softmax(std::vector<double>& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - hi);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

}  // namespace

FfnLayout::FfnLayout(const FfnDims& dims) {
  const std::size_t v = dims.vocab_size, c = dims.context, d = dims.embed, h = dims.hidden;
  std::size_t off = 0;
  embedding = off;
  off += (v + 1) * d;
  w_hidden = off;
  off += h * c * d;
  b_hidden = off;
  off += h;
  w_out = off;
  off += v * h;
  b_out = off;
  off += v;
  w_reg = off;
  off += dims.regression_head ? h : 0;
  b_reg = off;
  off += dims.regression_head ? 1 : 0;
  w_cls = off;
  off += dims.n_labels * h;
  b_cls = off;
  off += dims.n_labels;
  total = off;
}

FeedForwardLM FeedForwardLM::init(const FfnDims& dims, std::uint64_t seed) {
  if (dims.vocab_size < 1 || dims.context < 1 || dims.embed < 1 || dims.hidden < 1) {
    throw Error(Errc::ConfigError, "feed-forward LM dimensions must all be >= 1");
  }
  const FfnLayout layout(dims);
  std::vector<double> params(layout.total, 0.0);
  SplitMix64 rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) params[i] = rng.uniform() * 0.2 - 0.1;
  };
  fill(layout.embedding, layout.b_hidden);  // embeddings + hidden weights
  fill(layout.w_out, layout.b_out);
  fill(layout.w_reg, layout.b_reg);
  fill(layout.w_cls, layout.b_cls);
  return FeedForwardLM(dims, std::move(params));
}

FeedForwardLM::FeedForwardLM(const FfnDims& dims, std::vector<double> params)
    : dims_(dims), layout_(dims), params_(std::move(params)) {
  if (params_.size() != layout_.total) {
    throw Error(Errc::FormatError, "expected " + std::to_string(layout_.total) +
                                       " parameters, got " + std::to_string(params_.size()));
  }
}

FeedForwardLM::Activation FeedForwardLM::forward(TokenSpan history) const {
  const std::size_t c = dims_.context, d = dims_.embed, h = dims_.hidden;
  Activation act;
  act.window.assign(c, pad_id());
  const std::size_t take = std::min(c, history.size());
  for (std::size_t i = 0; i < take; ++i) {
    const TokenId id = history[history.size() - take + i];
    if (id >= dims_.vocab_size) throw Error(Errc::InvalidArgument, "token id out of range");
    act.window[c - take + i] = id;
  }

  const double* emb = params_.data() + layout_.embedding;
  const double* w1 = params_.data() + layout_.w_hidden;
  const double* b1 = params_.data() + layout_.b_hidden;
  act.hidden.assign(b1, b1 + h);
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = w1 + j * c * d;
    double a = act.hidden[j];
    for (std::size_t slot = 0; slot < c; ++slot) {
      const double* e = emb + static_cast<std::size_t>(act.window[slot]) * d;
      const double* w = row + slot * d;
      for (std::size_t k = 0; k < d; ++k) a += w[k] * e[k];
    }
    act.hidden[j] = std::tanh(a);
  }
  return act;
}

std::vector<double> FeedForwardLM::lm_probs(const Activation& act) const {
  const std::size_t v = dims_.vocab_size, h = dims_.hidden;
  const double* w2 = params_.data() + layout_.w_out;
  const double* b2 = params_.data() + layout_.b_out;
  std::vector<double> logits(b2, b2 + v);
  for (std::size_t o = 0; o < v; ++o) {
    const double* row = w2 + o * h;
    double s = logits[o];
    for (std::size_t j = 0; j < h; ++j) s += row[j] * act.hidden[j];
    logits[o] = s;
  }
  softmax(logits);
  return logits;
}

std::vector<double> FeedForwardLM::next_dist(TokenSpan context) const {
  return lm_probs(forward(context));
}

double FeedForwardLM::regression(const Activation& act) const {
  if (!dims_.regression_head) throw Error(Errc::ConfigError, "model has no regression head");
  const double* w = params_.data() + layout_.w_reg;
  double y = params_[layout_.b_reg];
  for (std::size_t j = 0; j < dims_.hidden; ++j) y += w[j] * act.hidden[j];
  return y;
}

std::vector<double> FeedForwardLM::label_probs(const Activation& act) const {
  if (dims_.n_labels == 0) throw Error(Errc::ConfigError, "model has no classification head");
  const std::size_t l = dims_.n_labels, h = dims_.hidden;
  const double* w = params_.data() + layout_.w_cls;
  const double* b = params_.data() + layout_.b_cls;
  std::vector<double> logits(b, b + l);
  for (std::size_t o = 0; o < l; ++o) {
    for (std::size_t j = 0; j < h; ++j) logits[o] += w[o * h + j] * act.hidden[j];
  }
  softmax(logits);
  return logits;
}

void FeedForwardLM::backward_lm(const Activation& act, std::span<const double> d_logits,
                                std::span<double> grad, std::span<double> d_hidden) const {
  const std::size_t v = dims_.vocab_size, h = dims_.hidden;
  const double* w2 = params_.data() + layout_.w_out;
  double* gw2 = grad.data() + layout_.w_out;
  double* gb2 = grad.data() + layout_.b_out;
  for (std::size_t o = 0; o < v; ++o) {
    const double g = d_logits[o];
    if (g == 0.0) continue;
    gb2[o] += g;
    double* grow = gw2 + o * h;
    const double* row = w2 + o * h;
    for (std::size_t j = 0; j < h; ++j) {
      grow[j] += g * act.hidden[j];
      d_hidden[j] += g * row[j];
    }
  }
}

void FeedForwardLM::backward_regression(const Activation& act, double d_pred,
                                        std::span<double> grad, std::span<double> d_hidden) const {
  const double* w = params_.data() + layout_.w_reg;
  double* gw = grad.data() + layout_.w_reg;
  grad[layout_.b_reg] += d_pred;
  for (std::size_t j = 0; j < dims_.hidden; ++j) {
    gw[j] += d_pred * act.hidden[j];
    d_hidden[j] += d_pred * w[j];
  }
}

void FeedForwardLM::backward_labels(const Activation& act, std::span<const double> d_logits,
                                    std::span<double> grad, std::span<double> d_hidden) const {
  const std::size_t l = dims_.n_labels, h = dims_.hidden;
  const double* w = params_.data() + layout_.w_cls;
  double* gw = grad.data() + layout_.w_cls;
  double* gb = grad.data() + layout_.b_cls;
  for (std::size_t o = 0; o < l; ++o) {
    const double g = d_logits[o];
    gb[o] += g;
    for (std::size_t j = 0; j < h; ++j) {
      gw[o * h + j] += g * act.hidden[j];
      d_hidden[j] += g * w[o * h + j];
    }
  }
}

void FeedForwardLM::backward_hidden(const Activation& act, std::span<const double> d_hidden,
                                    std::span<double> grad) const {
  const std::size_t c = dims_.context, d = dims_.embed, h = dims_.hidden;
  const double* emb = params_.data() + layout_.embedding;
  const double* w1 = params_.data() + layout_.w_hidden;
  double* gemb = grad.data() + layout_.embedding;
  double* gw1 = grad.data() + layout_.w_hidden;
  double* gb1 = grad.data() + layout_.b_hidden;
  std::vector<double> d_input(c * d, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double z = act.hidden[j];
    const double da = d_hidden[j] * (1.0 - z * z);
    if (da == 0.0) continue;
    gb1[j] += da;
    const double* row = w1 + j * c * d;
    double* grow = gw1 + j * c * d;
    for (std::size_t slot = 0; slot < c; ++slot) {
      const double* e = emb + static_cast<std::size_t>(act.window[slot]) * d;
      for (std::size_t k = 0; k < d; ++k) {
        grow[slot * d + k] += da * e[k];
        d_input[slot * d + k] += da * row[slot * d + k];
      }
    }
  }
  for (std::size_t slot = 0; slot < c; ++slot) {
    double* ge = gemb + static_cast<std::size_t>(act.window[slot]) * d;
    for (std::size_t k = 0; k < d; ++k) ge[k] += d_input[slot * d + k];
  }
}

}  // namespace lmeval::lm
