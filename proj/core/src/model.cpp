#include "ctxda/model.hpp"

#include <algorithm>
#include <cmath>

#include "ctxda/errors.hpp"

namespace ctxda {

namespace {

constexpr std::size_t kPredictBatch = 256;
constexpr double kMaskedScore = -1e9;

Var bind_param(Tape& tape, Parameter& p) { return tape.parameter(p); }
Var bind_param(Tape& tape, const Parameter& p) { return tape.constant(p.value); }

std::vector<double> column_of(const Tensor2D& t, std::size_t c) { return t.column_values(c); }

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw UsageError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

std::vector<const ContextWindow*> pointers(std::span<const ContextWindow> windows) {
  std::vector<const ContextWindow*> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(&w);
  return out;
}

std::vector<int> labels_of(std::span<const ContextWindow* const> batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto* w : batch) labels.push_back(w->label);
  return labels;
}

std::vector<Prediction> predictions_from_logits(const Tensor2D& logits) {
  std::vector<Prediction> out(logits.cols());
  for (std::size_t c = 0; c < logits.cols(); ++c) out[c].probs = softmax(logits.column_values(c));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

RNNDirectionParams::RNNDirectionParams(const std::string& prefix, std::size_t input_dim,
                                       std::size_t hidden_dim)
    : w_u(prefix + ".w_u", hidden_dim, input_dim),
      w_h(prefix + ".w_h", hidden_dim, hidden_dim),
      b_h(prefix + ".b_h", hidden_dim, 1) {}

BiRNNParams::BiRNNParams(std::size_t input_dim, std::size_t hidden_dim)
    : forward("birnn.fwd", input_dim, hidden_dim), backward("birnn.bwd", input_dim, hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw DimensionError("BiRNN dimensions must be positive");
}

AttentionParams::AttentionParams(std::size_t state_dim, std::size_t attention_dim)
    : w_h("attn.w_h", attention_dim, state_dim), w_m("attn.w_m", 1, attention_dim) {}

OutputParams::OutputParams(std::size_t state_dim, std::size_t classes)
    : w_y("out.w_y", classes, state_dim), b_y("out.b_y", classes, 1) {}

BaselineMLPParams::BaselineMLPParams(std::size_t input_dim, std::size_t hidden1,
                                     std::size_t hidden2, std::size_t classes)
    : w1("mlp.w1", hidden1, input_dim),
      b1("mlp.b1", hidden1, 1),
      w2("mlp.w2", hidden2, hidden1),
      b2("mlp.b2", hidden2, 1),
      w_out("mlp.w_out", classes, hidden2),
      b_out("mlp.b_out", classes, 1) {}

// ---------------------------------------------------------------------------

DirectionVars bind(Tape& tape, RNNDirectionParams& p) {
  return {bind_param(tape, p.w_u), bind_param(tape, p.w_h), bind_param(tape, p.b_h)};
}
DirectionVars bind(Tape& tape, const RNNDirectionParams& p) {
  return {bind_param(tape, p.w_u), bind_param(tape, p.w_h), bind_param(tape, p.b_h)};
}
AttentionVars bind(Tape& tape, AttentionParams& p) {
  return {bind_param(tape, p.w_h), bind_param(tape, p.w_m)};
}
AttentionVars bind(Tape& tape, const AttentionParams& p) {
  return {bind_param(tape, p.w_h), bind_param(tape, p.w_m)};
}
OutputVars bind(Tape& tape, OutputParams& p) {
  return {bind_param(tape, p.w_y), bind_param(tape, p.b_y)};
}
OutputVars bind(Tape& tape, const OutputParams& p) {
  return {bind_param(tape, p.w_y), bind_param(tape, p.b_y)};
}

std::vector<Var> rnn_direction(Tape& tape, std::span<const Var> seq, const DirectionVars& p,
                               bool reversed) {
  std::vector<Var> out(seq.size());
  if (seq.empty()) return out;
  const std::size_t hidden = tape.value(p.w_h).rows();
  const std::size_t batch = tape.value(seq.front()).cols();
  Var h = tape.constant(Tensor2D(hidden, batch));
  for (std::size_t step = 0; step < seq.size(); ++step) {
    const std::size_t k = reversed ? seq.size() - 1 - step : step;
    const Var pre = tape.add(tape.matmul(p.w_h, h), tape.matmul(p.w_u, seq[k]));
    h = tape.tanh(tape.add_bias(pre, p.b_h));
    out[k] = h;
  }
  return out;
}

std::vector<Var> birnn_forward(Tape& tape, std::span<const Var> seq, const DirectionVars& fwd,
                               const DirectionVars& bwd) {
  const std::size_t input_dim = tape.value(fwd.w_u).cols();
  for (Var u : seq) {
    if (tape.value(u).rows() != input_dim) {
      throw DimensionError("feature dim " + std::to_string(tape.value(u).rows()) +
                           " does not match BiRNN input dim " + std::to_string(input_dim));
    }
  }
  const auto f = rnn_direction(tape, seq, fwd, false);
  const auto b = rnn_direction(tape, seq, bwd, true);
  std::vector<Var> out(seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Var parts[] = {f[k], b[k]};
    out[k] = tape.concat_rows(parts);
  }
  return out;
}

AttentionOutput attention(Tape& tape, std::span<const Var> states, const AttentionVars& p,
                          const Tensor2D* score_offsets) {
  if (states.empty()) throw UsageError("attention over an empty sequence");
  std::vector<Var> scores;
  scores.reserve(states.size());
  for (Var h : states) {
    const Var m = tape.tanh(tape.matmul(p.w_h, h));
    scores.push_back(tape.matmul(p.w_m, m));
  }
  Var stacked = tape.concat_rows(scores);
  if (score_offsets != nullptr) stacked = tape.add_constant(stacked, *score_offsets);
  const Var weights = tape.softmax_columns(stacked);

  Var total;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Var weighted = tape.scale_columns(states[k], tape.row(weights, k));
    total = total.valid() ? tape.add(total, weighted) : weighted;
  }
  return {weights, tape.tanh(total)};
}

Var output_logits(Tape& tape, Var u, const OutputVars& p) {
  return tape.add_bias(tape.matmul(p.w_y, u), p.b_y);
}

Var apply_dropout(Tape& tape, Var h, double rate, Rng& rng, bool training) {
  check_rate(rate);
  if (!training || rate == 0.0) return h;
  const Tensor2D& v = tape.value(h);
  Tensor2D mask(v.rows(), v.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  return tape.hadamard(h, tape.constant(std::move(mask)));
}

Tensor2D apply_dropout(const Tensor2D& h, double rate, Rng& rng, bool training) {
  Tape tape;
  return tape.value(apply_dropout(tape, tape.constant(h), rate, rng, training));
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> rnn_direction(std::span<const FeatureVector> seq,
                                               const RNNDirectionParams& p, bool reversed) {
  Tape tape;
  std::vector<Var> inputs;
  for (const auto& u : seq) {
    if (u.dim() != p.w_u.value.cols()) {
      throw DimensionError("feature dim " + std::to_string(u.dim()) +
                           " does not match RNN input dim " + std::to_string(p.w_u.value.cols()));
    }
    inputs.push_back(tape.constant(Tensor2D::column(u.values)));
  }
  const auto states = rnn_direction(tape, inputs, bind(tape, p), reversed);
  std::vector<std::vector<double>> out;
  for (Var h : states) out.push_back(column_of(tape.value(h), 0));
  return out;
}

Tensor2D birnn_forward(const ContextWindow& w, const BiRNNParams& p) {
  Tape tape;
  const ContextWindow* one[] = {&w};
  std::vector<Var> inputs;
  for (std::size_t s = 0; s < w.slots(); ++s) inputs.push_back(tape.constant(stack_slot(one, s)));
  const auto states = birnn_forward(tape, inputs, bind(tape, p.forward), bind(tape, p.backward));
  Tensor2D out(states.size(), 2 * p.hidden_dim());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Tensor2D& h = tape.value(states[k]);
    for (std::size_t i = 0; i < h.rows(); ++i) out(k, i) = h(i, 0);
  }
  return out;
}

std::pair<AttentionProfile, std::vector<double>> attention(const Tensor2D& h,
                                                           const AttentionParams& p) {
  if (h.cols() != p.w_h.value.cols()) {
    throw DimensionError("state width " + std::to_string(h.cols()) +
                         " does not match attention input " + std::to_string(p.w_h.value.cols()));
  }
  Tape tape;
  std::vector<Var> states;
  for (std::size_t k = 0; k < h.rows(); ++k) states.push_back(tape.constant(Tensor2D::column(h.row(k))));
  const auto out = attention(tape, states, bind(tape, p));
  const Tensor2D& a = tape.value(out.weights);
  AttentionProfile profile;
  for (std::size_t k = 0; k < a.rows(); ++k) profile.weights.push_back(a(a.rows() - 1 - k, 0));
  return {profile, column_of(tape.value(out.u_final), 0)};
}

Prediction classify(std::span<const double> u_final, const OutputParams& p) {
  if (u_final.size() != p.w_y.value.cols()) {
    throw DimensionError("u_final has " + std::to_string(u_final.size()) +
                         " values, output layer expects " + std::to_string(p.w_y.value.cols()));
  }
  Tape tape;
  const Var logits = output_logits(tape, tape.constant(Tensor2D::column(u_final)), bind(tape, p));
  Prediction pred;
  pred.probs = softmax(tape.value(logits).values());
  return pred;
}

Prediction birnn_direct_classify(const ContextWindow& w, const BiRNNParams& p,
                                 const OutputParams& out) {
  const Tensor2D h = birnn_forward(w, p);
  return classify(h.row(h.rows() - 1), out);
}

Prediction baseline_forward(const FeatureVector& u, const BaselineMLPParams& p, bool training,
                            Rng* rng, double dropout) {
  check_rate(dropout);
  if (training && dropout > 0.0 && rng == nullptr) throw UsageError("training dropout needs an Rng");
  if (u.dim() != p.w1.value.cols()) {
    throw DimensionError("feature dim " + std::to_string(u.dim()) +
                         " does not match MLP input dim " + std::to_string(p.w1.value.cols()));
  }
  Tape tape;
  Rng unused(0);
  Rng& r = rng != nullptr ? *rng : unused;
  Var h = tape.constant(Tensor2D::column(u.values));
  h = tape.tanh(tape.add_bias(tape.matmul(bind_param(tape, p.w1), h), bind_param(tape, p.b1)));
  h = apply_dropout(tape, h, dropout, r, training);
  h = tape.tanh(tape.add_bias(tape.matmul(bind_param(tape, p.w2), h), bind_param(tape, p.b2)));
  h = apply_dropout(tape, h, dropout, r, training);
  const Var logits =
      tape.add_bias(tape.matmul(bind_param(tape, p.w_out), h), bind_param(tape, p.b_out));
  Prediction pred;
  pred.probs = softmax(tape.value(logits).values());
  return pred;
}

// ---------------------------------------------------------------------------

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kBaseline ? "baseline" : "uttattbirnn";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "baseline") return ModelKind::kBaseline;
  if (name == "uttattbirnn") return ModelKind::kUttAttBiRNN;
  throw UsageError("unknown model '" + std::string(name) + "' (expected baseline or uttattbirnn)");
}

void Classifier::init(Rng& rng) { init_parameters(parameters(), rng); }

Tensor2D stack_slot(std::span<const ContextWindow* const> batch, std::size_t slot) {
  if (batch.empty()) throw UsageError("empty batch");
  const std::size_t dim = batch.front()->features.at(slot).dim();
  Tensor2D out(dim, batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& f = batch[j]->features.at(slot);
    if (f.dim() != dim) {
      throw DimensionError("feature dims differ within a batch: " + std::to_string(f.dim()) +
                           " vs " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) out(i, j) = f.values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

BaselineMLP::BaselineMLP(std::size_t input_dim, std::size_t classes, BaselineConfig cfg)
    : cfg_(cfg), params_(input_dim, cfg.hidden1, cfg.hidden2, classes) {
  check_rate(cfg.dropout);
}

std::vector<Parameter*> BaselineMLP::parameters() {
  auto& p = params_;
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.w_out, &p.b_out};
}

std::vector<const Parameter*> BaselineMLP::parameters() const {
  const auto& p = params_;
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.w_out, &p.b_out};
}

Var BaselineMLP::batch_loss(Tape& tape, std::span<const ContextWindow* const> batch, Rng& rng,
                            bool training) {
  const std::size_t current = batch.front()->slots() - 1;
  Var h = tape.constant(stack_slot(batch, current));
  if (tape.value(h).rows() != input_dim()) {
    throw DimensionError("feature dim " + std::to_string(tape.value(h).rows()) +
                         " does not match MLP input dim " + std::to_string(input_dim()));
  }
  auto& p = params_;
  h = tape.tanh(tape.add_bias(tape.matmul(tape.parameter(p.w1), h), tape.parameter(p.b1)));
  h = apply_dropout(tape, h, cfg_.dropout, rng, training);
  h = tape.tanh(tape.add_bias(tape.matmul(tape.parameter(p.w2), h), tape.parameter(p.b2)));
  h = apply_dropout(tape, h, cfg_.dropout, rng, training);
  const Var logits =
      tape.add_bias(tape.matmul(tape.parameter(p.w_out), h), tape.parameter(p.b_out));
  const auto labels = labels_of(batch);
  return tape.softmax_cross_entropy(logits, labels);
}

std::vector<Prediction> BaselineMLP::predict(std::span<const ContextWindow> windows) const {
  std::vector<Prediction> out;
  out.reserve(windows.size());
  const auto ptrs = pointers(windows);
  const auto& p = params_;
  for (std::size_t start = 0; start < ptrs.size(); start += kPredictBatch) {
    const std::span<const ContextWindow* const> batch(
        ptrs.data() + start, std::min(kPredictBatch, ptrs.size() - start));
    Tape tape;
    Var h = tape.constant(stack_slot(batch, batch.front()->slots() - 1));
    if (tape.value(h).rows() != input_dim()) {
      throw DimensionError("feature dim " + std::to_string(tape.value(h).rows()) +
                           " does not match MLP input dim " + std::to_string(input_dim()));
    }
    h = tape.tanh(tape.add_bias(tape.matmul(bind_param(tape, p.w1), h), bind_param(tape, p.b1)));
    h = tape.tanh(tape.add_bias(tape.matmul(bind_param(tape, p.w2), h), bind_param(tape, p.b2)));
    const Var logits =
        tape.add_bias(tape.matmul(bind_param(tape, p.w_out), h), bind_param(tape, p.b_out));
    for (auto& pred : predictions_from_logits(tape.value(logits))) out.push_back(std::move(pred));
  }
  return out;
}

std::unique_ptr<Classifier> BaselineMLP::clone() const {
  return std::make_unique<BaselineMLP>(*this);
}

// ---------------------------------------------------------------------------

UttAttBiRNN::UttAttBiRNN(std::size_t input_dim, std::size_t classes, UttAttConfig cfg)
    : cfg_(cfg),
      birnn_(input_dim, cfg.hidden_dim),
      attention_(2 * cfg.hidden_dim, cfg.attention_dim == 0 ? 2 * cfg.hidden_dim : cfg.attention_dim),
      output_(2 * cfg.hidden_dim, classes) {
  if (cfg_.attention_dim == 0) cfg_.attention_dim = 2 * cfg.hidden_dim;
  check_rate(cfg.dropout);
}

std::vector<Parameter*> UttAttBiRNN::parameters() {
  std::vector<Parameter*> out = {&birnn_.forward.w_u,  &birnn_.forward.w_h,  &birnn_.forward.b_h,
                                 &birnn_.backward.w_u, &birnn_.backward.w_h, &birnn_.backward.b_h};
  if (cfg_.head == OutputHead::kAttention) {
    out.push_back(&attention_.w_h);
    out.push_back(&attention_.w_m);
  }
  out.push_back(&output_.w_y);
  out.push_back(&output_.b_y);
  return out;
}

std::vector<const Parameter*> UttAttBiRNN::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<UttAttBiRNN*>(this)->parameters()) out.push_back(p);
  return out;
}

template <typename Self>
UttAttBiRNN::Forward UttAttBiRNN::forward(Self& self, Tape& tape,
                                          std::span<const ContextWindow* const> batch, Rng* rng,
                                          bool training) {
  const std::size_t slots = batch.front()->slots();
  std::vector<Var> inputs;
  inputs.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    for (const auto* w : batch) {
      if (w->slots() != slots) throw DimensionError("windows in a batch differ in length");
    }
    inputs.push_back(tape.constant(stack_slot(batch, s)));
  }
  auto states = birnn_forward(tape, inputs, bind(tape, self.birnn_.forward),
                              bind(tape, self.birnn_.backward));
  if (training && self.cfg_.dropout > 0.0) {
    for (Var& h : states) h = apply_dropout(tape, h, self.cfg_.dropout, *rng, true);
  }
  const OutputVars out = bind(tape, self.output_);
  if (self.cfg_.head == OutputHead::kDirect) {
    return {output_logits(tape, states.back(), out), std::nullopt};
  }
  std::optional<Tensor2D> offsets;
  if (self.cfg_.mask_pads) {
    offsets.emplace(slots, batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j)
      for (std::size_t s = 0; s < slots; ++s)
        if (!batch[j]->pad_mask.at(s)) (*offsets)(s, j) = kMaskedScore;
  }
  const AttentionOutput attn =
      attention(tape, states, bind(tape, self.attention_), offsets ? &*offsets : nullptr);
  return {output_logits(tape, attn.u_final, out), attn};
}

Var UttAttBiRNN::batch_loss(Tape& tape, std::span<const ContextWindow* const> batch, Rng& rng,
                            bool training) {
  const Forward fw = forward(*this, tape, batch, &rng, training);
  const auto labels = labels_of(batch);
  return tape.softmax_cross_entropy(fw.logits, labels);
}

std::vector<Prediction> UttAttBiRNN::predict(std::span<const ContextWindow> windows) const {
  std::vector<Prediction> out;
  out.reserve(windows.size());
  const auto ptrs = pointers(windows);
  for (std::size_t start = 0; start < ptrs.size(); start += kPredictBatch) {
    const std::span<const ContextWindow* const> batch(
        ptrs.data() + start, std::min(kPredictBatch, ptrs.size() - start));
    Tape tape;
    const Forward fw = forward(*this, tape, batch, nullptr, false);
    auto preds = predictions_from_logits(tape.value(fw.logits));
    if (fw.attn) {
      const Tensor2D& a = tape.value(fw.attn->weights);
      for (std::size_t j = 0; j < preds.size(); ++j) {
        AttentionProfile profile;
        for (std::size_t k = 0; k < a.rows(); ++k) profile.weights.push_back(a(a.rows() - 1 - k, j));
        preds[j].attention = std::move(profile);
      }
    }
    for (auto& pred : preds) out.push_back(std::move(pred));
  }
  return out;
}

std::unique_ptr<Classifier> UttAttBiRNN::clone() const {
  return std::make_unique<UttAttBiRNN>(*this);
}

}  // namespace ctxda
