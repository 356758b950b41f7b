#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxda/rng.hpp"
#include "ctxda/tape.hpp"
#include "ctxda/tensor.hpp"
#include "ctxda/types.hpp"

namespace ctxda {

// ---------------------------------------------------------------------------
// Parameter blocks

struct RNNDirectionParams {
  RNNDirectionParams() = default;
  RNNDirectionParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim);

  Parameter w_u;  // hidden x input
  Parameter w_h;  // hidden x hidden
  Parameter b_h;  // hidden x 1
};

struct BiRNNParams {
  BiRNNParams() = default;
  BiRNNParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const noexcept { return forward.w_u.value.cols(); }
  std::size_t hidden_dim() const noexcept { return forward.w_u.value.rows(); }

  RNNDirectionParams forward;
  RNNDirectionParams backward;
};

struct AttentionParams {
  AttentionParams() = default;
  AttentionParams(std::size_t state_dim, std::size_t attention_dim);

  Parameter w_h;  // attention_dim x state_dim (state_dim = 2 * hidden)
  Parameter w_m;  // 1 x attention_dim (score vector, stored as a row)
};

struct OutputParams {
  OutputParams() = default;
  OutputParams(std::size_t state_dim, std::size_t classes);

  std::size_t classes() const noexcept { return w_y.value.rows(); }

  Parameter w_y;  // classes x state_dim
  Parameter b_y;  // classes x 1
};

struct BaselineMLPParams {
  BaselineMLPParams() = default;
  BaselineMLPParams(std::size_t input_dim, std::size_t hidden1, std::size_t hidden2,
                    std::size_t classes);

  Parameter w1, b1;
  Parameter w2, b2;
  Parameter w_out, b_out;
};

// ---------------------------------------------------------------------------
// Tape-level building blocks. Sequences are one Var per window slot, oldest
// first, each (dim x B) with one example per column.

struct DirectionVars {
  Var w_u, w_h, b_h;
};

DirectionVars bind(Tape& tape, RNNDirectionParams& p);
DirectionVars bind(Tape& tape, const RNNDirectionParams& p);

/// h_k = tanh(W_h h_prev + W_u u_k + b_h) from a zero state. With `reversed`
/// the recurrence runs newest to oldest; outputs stay aligned with inputs.
std::vector<Var> rnn_direction(Tape& tape, std::span<const Var> seq, const DirectionVars& p,
                               bool reversed);

/// Per-slot [forward ; backward] states, each (2*hidden x B).
std::vector<Var> birnn_forward(Tape& tape, std::span<const Var> seq, const DirectionVars& fwd,
                               const DirectionVars& bwd);

struct AttentionVars {
  Var w_h, w_m;
};

AttentionVars bind(Tape& tape, AttentionParams& p);
AttentionVars bind(Tape& tape, const AttentionParams& p);

struct AttentionOutput {
  Var weights;  // (slots x B), row k = slot k in chronological order
  Var u_final;  // (state_dim x B)
};

/// m_k = tanh(W_h h_k), s_k = W_m^T m_k, a = softmax(s), u_final = tanh(sum_k a_k h_k).
/// `score_offsets`, when given, is added to the (slots x B) scores; large
/// negative entries remove pad slots from the softmax.
AttentionOutput attention(Tape& tape, std::span<const Var> states, const AttentionVars& p,
                          const Tensor2D* score_offsets = nullptr);

struct OutputVars {
  Var w_y, b_y;
};

OutputVars bind(Tape& tape, OutputParams& p);
OutputVars bind(Tape& tape, const OutputParams& p);

/// W_y u + b_y, (classes x B).
Var output_logits(Tape& tape, Var u, const OutputVars& p);

/// Inverted dropout: in training, zero each entry with probability `rate` and
/// scale survivors by 1/(1-rate); identity otherwise. rate must be in [0, 1).
Var apply_dropout(Tape& tape, Var h, double rate, Rng& rng, bool training);
Tensor2D apply_dropout(const Tensor2D& h, double rate, Rng& rng, bool training);

// ---------------------------------------------------------------------------
// Single-window forms

/// Hidden state per position (hidden_dim values each), aligned with `seq`.
std::vector<std::vector<double>> rnn_direction(std::span<const FeatureVector> seq,
                                               const RNNDirectionParams& p, bool reversed);

/// (slots x 2*hidden) matrix; row k = [forward_k ; backward_k].
Tensor2D birnn_forward(const ContextWindow& w, const BiRNNParams& p);

/// `h` is (slots x state_dim), rows oldest first. The profile is re-indexed
/// so that weights[0] belongs to the newest row.
std::pair<AttentionProfile, std::vector<double>> attention(const Tensor2D& h,
                                                           const AttentionParams& p);

Prediction classify(std::span<const double> u_final, const OutputParams& p);

/// Softmax over W_y [h^f_t ; h^b_t] + b_y using the newest slot's states,
/// without attention.
Prediction birnn_direct_classify(const ContextWindow& w, const BiRNNParams& p,
                                 const OutputParams& out);

/// tanh -> tanh -> softmax over the current utterance only.
Prediction baseline_forward(const FeatureVector& u, const BaselineMLPParams& p, bool training,
                            Rng* rng = nullptr, double dropout = 0.0);

// ---------------------------------------------------------------------------
// Classifiers

enum class ModelKind { kBaseline, kUttAttBiRNN };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;

  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<const Parameter*> parameters() const = 0;

  virtual void init(Rng& rng);

  /// Mean cross-entropy over the batch, recorded on `tape`.
  virtual Var batch_loss(Tape& tape, std::span<const ContextWindow* const> batch, Rng& rng,
                         bool training) = 0;

  /// Inference (dropout off). Safe to call concurrently.
  virtual std::vector<Prediction> predict(std::span<const ContextWindow> windows) const = 0;

  virtual std::unique_ptr<Classifier> clone() const = 0;
};

struct BaselineConfig {
  std::size_t hidden1 = 300;
  std::size_t hidden2 = 100;
  double dropout = 0.0;
};

class BaselineMLP final : public Classifier {
 public:
  BaselineMLP(std::size_t input_dim, std::size_t classes, BaselineConfig cfg = {});

  ModelKind kind() const override { return ModelKind::kBaseline; }
  std::size_t input_dim() const override { return params_.w1.value.cols(); }
  std::size_t num_classes() const override { return params_.w_out.value.rows(); }
  const BaselineConfig& config() const noexcept { return cfg_; }

  std::vector<Parameter*> parameters() override;
  std::vector<const Parameter*> parameters() const override;

  Var batch_loss(Tape& tape, std::span<const ContextWindow* const> batch, Rng& rng,
                 bool training) override;
  std::vector<Prediction> predict(std::span<const ContextWindow> windows) const override;
  std::unique_ptr<Classifier> clone() const override;

  BaselineMLPParams& params() noexcept { return params_; }
  const BaselineMLPParams& params() const noexcept { return params_; }

 private:
  BaselineConfig cfg_;
  BaselineMLPParams params_;
};

enum class OutputHead { kAttention, kDirect };

struct UttAttConfig {
  std::size_t hidden_dim = 64;
  std::size_t attention_dim = 0;  // 0 -> 2 * hidden_dim
  double dropout = 0.2;
  bool mask_pads = false;
  OutputHead head = OutputHead::kAttention;
};

class UttAttBiRNN final : public Classifier {
 public:
  UttAttBiRNN(std::size_t input_dim, std::size_t classes, UttAttConfig cfg = {});

  ModelKind kind() const override { return ModelKind::kUttAttBiRNN; }
  std::size_t input_dim() const override { return birnn_.input_dim(); }
  std::size_t num_classes() const override { return output_.classes(); }
  const UttAttConfig& config() const noexcept { return cfg_; }

  std::vector<Parameter*> parameters() override;
  std::vector<const Parameter*> parameters() const override;

  Var batch_loss(Tape& tape, std::span<const ContextWindow* const> batch, Rng& rng,
                 bool training) override;
  std::vector<Prediction> predict(std::span<const ContextWindow> windows) const override;
  std::unique_ptr<Classifier> clone() const override;

  BiRNNParams& birnn() noexcept { return birnn_; }
  AttentionParams& attention_params() noexcept { return attention_; }
  OutputParams& output() noexcept { return output_; }
  const BiRNNParams& birnn() const noexcept { return birnn_; }
  const AttentionParams& attention_params() const noexcept { return attention_; }
  const OutputParams& output() const noexcept { return output_; }

 private:
  struct Forward {
    Var logits;
    std::optional<AttentionOutput> attn;
  };
  template <typename Self>
  static Forward forward(Self& self, Tape& tape, std::span<const ContextWindow* const> batch,
                         Rng* rng, bool training);

  UttAttConfig cfg_;
  BiRNNParams birnn_;
  AttentionParams attention_;
  OutputParams output_;
};

/// Stacks slot `slot` of each window into a (dim x B) tensor.
Tensor2D stack_slot(std::span<const ContextWindow* const> batch, std::size_t slot);

}  // namespace ctxda
