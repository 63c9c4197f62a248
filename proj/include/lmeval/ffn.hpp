#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lmeval/lm.hpp"

namespace lmeval::lm {

struct FfnDims {
  std::size_t vocab_size = 0;
  std::size_t context = 8;   // c: tokens in the input window
  std::size_t embed = 32;    // d
  std::size_t hidden = 64;   // h
  bool regression_head = false;
  std::size_t n_labels = 0;  // classification head width; 0 disables it

  bool operator==(const FfnDims&) const = default;
};

/// Parameter offsets into the flat parameter vector, in storage order.
struct FfnLayout {
  std::size_t embedding, w_hidden, b_hidden, w_out, b_out, w_reg, b_reg, w_cls, b_cls, total;
  explicit FfnLayout(const FfnDims& dims);
};

/// Classic feed-forward neural LM: the last `context` tokens are embedded,
/// concatenated, passed through one tanh layer and a softmax output layer.
/// Histories shorter than the window are left-padded with a reserved pad id
/// (== vocab_size) that owns a trainable embedding row. Optional heads read
/// the same hidden layer.
///
/// All parameters live in one contiguous vector so optimizers and gradient
/// checks can treat the model as a flat array.
class FeedForwardLM final : public LanguageModel {
 public:
  /// Weights uniform in [-0.1, 0.1] from SplitMix64(seed), biases zero.
  static FeedForwardLM init(const FfnDims& dims, std::uint64_t seed);

  /// Throws FormatError when `params` does not match the layout size.
  FeedForwardLM(const FfnDims& dims, std::vector<double> params);

  static std::size_t param_count(const FfnDims& dims) { return FfnLayout(dims).total; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::string backend() const override { return "ffn"; }
  std::size_t vocab_size() const override { return dims_.vocab_size; }
  std::vector<double> next_dist(TokenSpan context) const override;

  const FfnDims& dims() const noexcept { return dims_; }
  const FfnLayout& layout() const noexcept { return layout_; }
  TokenId pad_id() const noexcept { return static_cast<TokenId>(dims_.vocab_size); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  /// Hidden-layer state for the window ending at the end of `history`.
  struct Activation {
    std::vector<TokenId> window;  // exactly `context` ids, pad-filled on the left
    std::vector<double> hidden;   // tanh output, size h
  };

  Activation forward(TokenSpan history) const;

  /// Softmax over the LM output layer.
  std::vector<double> lm_probs(const Activation& act) const;
  /// Scalar regression head output.
  double regression(const Activation& act) const;
  /// Softmax over the classification head.
  std::vector<double> label_probs(const Activation& act) const;

  // Reverse-mode pieces. Each adds weight-free contributions to `grad` (size
  // param_count()) and accumulates dLoss/dhidden into `d_hidden`.
  void backward_lm(const Activation& act, std::span<const double> d_logits, std::span<double> grad,
                   std::span<double> d_hidden) const;
  void backward_regression(const Activation& act, double d_pred, std::span<double> grad,
                           std::span<double> d_hidden) const;
  void backward_labels(const Activation& act, std::span<const double> d_logits,
                       std::span<double> grad, std::span<double> d_hidden) const;
  /// Propagates dLoss/dhidden through tanh, the hidden layer and embeddings.
  void backward_hidden(const Activation& act, std::span<const double> d_hidden,
                       std::span<double> grad) const;

 private:
  FfnDims dims_;
  FfnLayout layout_;
  std::vector<double> params_;
};

}  // namespace lmeval::lm
