#include "ctxda/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "ctxda/errors.hpp"
#include "ctxda/rng.hpp"

namespace ctxda {

double cross_entropy(const Prediction& pred, int gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= pred.probs.size()) {
    throw UsageError("gold label " + std::to_string(gold) + " outside " +
                     std::to_string(pred.probs.size()) + " classes");
  }
  return -std::log(std::max(pred.probs[static_cast<std::size_t>(gold)], 1e-12));
}

AdamState::AdamState(std::span<Parameter* const> params, double base_lr, double beta1,
                     double beta2, double epsilon)
    : base_lr_(base_lr), lr_(base_lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const Parameter* p : params) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw UsageError("Adam state tracks " + std::to_string(state.m_.size()) +
                     " parameters, given " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (!p.grad.same_shape(state.m_[i])) {
      throw DimensionError("gradient of " + p.name + " is " + p.grad.shape_string() +
                           ", Adam moment is " + state.m_[i].shape_string());
    }
    if (!p.grad.all_finite()) {
      throw DivergenceError("non-finite gradient in parameter " + p.name, 0);
    }
  }
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(state.beta1_, t);
  const double c2 = 1.0 - std::pow(state.beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor2D& m = state.m_[i];
    Tensor2D& v = state.v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = state.beta1_ * m[k] + (1.0 - state.beta1_) * g;
      v[k] = state.beta2_ * v[k] + (1.0 - state.beta2_) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p.value[k] -= state.lr_ * m_hat / (std::sqrt(v_hat) + state.epsilon_);
    }
  }
}

double decayed_learning_rate(double base_lr, double gamma, int epoch) {
  return base_lr * std::pow(gamma, epoch);
}

double decay_lr(AdamState& state, int epoch, double gamma) {
  state.set_learning_rate(decayed_learning_rate(state.base_learning_rate(), gamma, epoch));
  return state.learning_rate();
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw UsageError("patience must be at least 1");
}

bool EarlyStopping::update(double val_accuracy) {
  ++epoch_;
  if (val_accuracy > best_) {
    best_ = val_accuracy;
    best_epoch_ = epoch_;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  return false;
}

void TrainConfig::validate() const {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw UsageError("validation fraction must be in (0, 1)");
  }
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (max_epochs < 1) throw UsageError("max epochs must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw UsageError("learning-rate decay must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
  if (patience < 1) throw UsageError("patience must be at least 1");
}

std::pair<std::vector<ContextWindow>, std::vector<ContextWindow>> split_validation(
    std::span<const ContextWindow> windows, double fraction, std::uint64_t seed,
    bool by_conversation) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("validation fraction must be in (0, 1)");
  const std::size_t n = windows.size();
  if (n < 2) throw UsageError("need at least two windows to split off validation");
  Rng rng(seed);

  std::vector<ContextWindow> train_set;
  std::vector<ContextWindow> val_set;
  if (!by_conversation) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      (i < n_val ? val_set : train_set).push_back(windows[order[i]]);
    }
    return {std::move(train_set), std::move(val_set)};
  }

  // Conversation-level: shuffle conversation ids (in first-seen order) and
  // take conversations until the validation share reaches the target.
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> counts;
  for (const auto& w : windows) {
    if (counts[w.conversation_id]++ == 0) ids.push_back(w.conversation_id);
  }
  if (ids.size() < 2) throw UsageError("conversation-level split needs at least two conversations");
  rng.shuffle(std::span<std::string>(ids));
  const double target = fraction * static_cast<double>(n);
  std::set<std::string> val_ids;
  std::size_t taken = 0;
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
    if (!val_ids.empty() && static_cast<double>(taken) >= target) break;
    val_ids.insert(ids[i]);
    taken += counts[ids[i]];
  }
  for (const auto& w : windows) {
    (val_ids.count(w.conversation_id) ? val_set : train_set).push_back(w);
  }
  return {std::move(train_set), std::move(val_set)};
}

double accuracy_percent(const Classifier& model, std::span<const ContextWindow> windows) {
  if (windows.empty()) return 0.0;
  const auto preds = model.predict(windows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (preds[i].argmax() == windows[i].label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(windows.size());
}

TrainResult train(Classifier& model, std::span<const ContextWindow> train_set,
                  std::span<const ContextWindow> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw UsageError("empty training set");
  if (val_set.empty()) throw UsageError("empty validation set");

  Rng rng(cfg.seed);
  const auto params = model.parameters();
  AdamState adam(params, cfg.learning_rate);
  EarlyStopping stopper(cfg.patience);
  std::vector<Tensor2D> best;
  TrainResult result;

  std::vector<const ContextWindow*> order;
  order.reserve(train_set.size());
  for (const auto& w : train_set) order.push_back(&w);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    decay_lr(adam, epoch - 1, cfg.lr_decay);
    rng.shuffle(std::span<const ContextWindow*>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const ContextWindow* const> batch(
          order.data() + start, std::min(cfg.batch_size, order.size() - start));
      for (Parameter* p : params) p->zero_grad();
      Tape tape;
      const Var loss = model.batch_loss(tape, batch, rng, true);
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite training loss in epoch " + std::to_string(epoch), epoch);
      }
      tape.backward(loss);
      try {
        adam_step(params, adam);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " in epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += value * static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = adam.learning_rate();
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = accuracy_percent(model, train_set);
    rec.val_accuracy = accuracy_percent(model, val_set);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (stopper.update(rec.val_accuracy)) {
      best.clear();
      for (const Parameter* p : params) best.push_back(p->value);
    }
    if (stopper.should_stop()) break;
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  result.best_epoch = stopper.best_epoch();
  result.best_val_accuracy = stopper.best();
  return result;
}

TrainResult train(Classifier& model, std::span<const ContextWindow> windows,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (windows.empty()) throw UsageError("empty training set");
  auto [train_set, val_set] =
      split_validation(windows, cfg.validation_fraction, cfg.seed, cfg.split_by_conversation);
  return train(model, train_set, val_set, cfg, on_epoch);
}

void write_history_csv(std::span<const EpochRecord> history, std::ostream& out) {
  out << "epoch,lr,train_loss,train_accuracy,val_accuracy\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << std::setprecision(10) << r.lr << ',' << r.train_loss << ','
        << r.train_accuracy << ',' << r.val_accuracy << '\n';
  }
}

}  // namespace ctxda
