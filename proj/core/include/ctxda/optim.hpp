#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "ctxda/model.hpp"
#include "ctxda/tensor.hpp"
#include "ctxda/types.hpp"

namespace ctxda {

/// -log(max(p_gold, 1e-12)). Throws UsageError when gold is out of range.
double cross_entropy(const Prediction& pred, int gold);

/// Moment estimates for a fixed list of parameters.
class AdamState {
 public:
  AdamState(std::span<Parameter* const> params, double base_lr, double beta1 = 0.9,
            double beta2 = 0.999, double epsilon = 1e-8);

  double base_learning_rate() const noexcept { return base_lr_; }
  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }
  std::uint64_t step() const noexcept { return step_; }

  double beta1() const noexcept { return beta1_; }
  double beta2() const noexcept { return beta2_; }
  double epsilon() const noexcept { return epsilon_; }

  const Tensor2D& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor2D& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  friend void adam_step(std::span<Parameter* const> params, AdamState& state);

  double base_lr_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::uint64_t step_ = 0;
  std::vector<Tensor2D> m_;
  std::vector<Tensor2D> v_;
};

/// Bias-corrected Adam update at the state's current learning rate. `params`
/// must be the list the state was built with. A non-finite gradient throws
/// DivergenceError naming the parameter, before anything is modified.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// base_lr * gamma^epoch.
double decayed_learning_rate(double base_lr, double gamma, int epoch);

/// Sets the state's learning rate to base_lr * gamma^epoch and returns it.
double decay_lr(AdamState& state, int epoch, double gamma = 0.95);

/// Stops once validation accuracy has not strictly improved for `patience`
/// consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  /// Records the next epoch's validation accuracy; true when it is a new best.
  bool update(double val_accuracy);
  bool should_stop() const noexcept { return since_improvement_ >= patience_; }

  int patience() const noexcept { return patience_; }
  double best() const noexcept { return best_; }
  int best_epoch() const noexcept { return best_epoch_; }
  int epochs_since_improvement() const noexcept { return since_improvement_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_improvement_ = 0;
  double best_ = -1.0;
};

struct TrainConfig {
  std::size_t n_context = 4;
  std::size_t batch_size = 64;
  int max_epochs = 100;
  double dropout = 0.2;  // consumed by model construction
  double learning_rate = 1e-4;
  double lr_decay = 0.95;
  double validation_fraction = 0.15;
  int patience = 5;
  std::uint64_t seed = 1;
  bool split_by_conversation = false;

  /// Throws UsageError on out-of-range fields.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // percent
  double val_accuracy = 0.0;    // percent
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

/// Seeded shuffle, then the first round(fraction * N) windows (at least 1,
/// at most N - 1) go to validation. With `by_conversation`, whole
/// conversations are assigned instead so no context crosses the split.
std::pair<std::vector<ContextWindow>, std::vector<ContextWindow>> split_validation(
    std::span<const ContextWindow> windows, double fraction, std::uint64_t seed,
    bool by_conversation = false);

/// Percentage of windows whose argmax prediction equals the label.
double accuracy_percent(const Classifier& model, std::span<const ContextWindow> windows);

/// Called after each epoch; useful for logging.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam with per-epoch learning-rate decay and early stopping on
/// validation accuracy. The model must already be initialized. On return it
/// holds the parameters of the best validation epoch.
TrainResult train(Classifier& model, std::span<const ContextWindow> train_set,
                  std::span<const ContextWindow> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Splits off cfg.validation_fraction of `windows` and trains on the rest.
TrainResult train(Classifier& model, std::span<const ContextWindow> windows,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// epoch,lr,train_loss,train_accuracy,val_accuracy
void write_history_csv(std::span<const EpochRecord> history, std::ostream& out);

}  // namespace ctxda
