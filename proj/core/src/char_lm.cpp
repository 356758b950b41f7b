#include "ctxda/char_lm.hpp"

#include <algorithm>
#include <cmath>

#include "ctxda/errors.hpp"
#include "ctxda/optim.hpp"

namespace ctxda {

CharLanguageModel::CharLanguageModel(CharVocab vocab, std::size_t hidden_dim)
    : vocab_(std::move(vocab)),
      cell_(vocab_.size(), hidden_dim),
      w_out_("charlm.w_out", vocab_.size(), hidden_dim),
      b_out_("charlm.b_out", vocab_.size(), 1) {}

void CharLanguageModel::init(Rng& rng) { init_parameters(parameters(), rng); }

std::vector<Parameter*> CharLanguageModel::parameters() {
  auto out = cell_.parameters();
  out.push_back(&w_out_);
  out.push_back(&b_out_);
  return out;
}

std::vector<const Parameter*> CharLanguageModel::parameters() const {
  auto out = cell_.parameters();
  out.push_back(&w_out_);
  out.push_back(&b_out_);
  return out;
}

Var CharLanguageModel::sequence_loss(Tape& tape, const std::string& text, std::size_t max_chars) {
  const std::size_t len = std::min(text.size(), max_chars);
  if (len < 2) return {};
  const MLSTMVars cell(tape, cell_);
  const Var w_out = tape.parameter(w_out_);
  const Var b_out = tape.parameter(b_out_);
  const std::size_t hidden = hidden_dim();
  MLSTMStateVars state{tape.constant(Tensor2D(hidden, 1)), tape.constant(Tensor2D(hidden, 1))};
  Var total;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    state = mlstm_step(tape, tape.constant(one_hot(vocab_, text[t])), state.h, state.c, cell);
    const Var logits = tape.add_bias(tape.matmul(w_out, state.h), b_out);
    const int next[] = {static_cast<int>(vocab_.index(text[t + 1]))};
    const Var step_loss = tape.softmax_cross_entropy(logits, next);
    total = total.valid() ? tape.add(total, step_loss) : step_loss;
  }
  return tape.scale(total, 1.0 / static_cast<double>(len - 1));
}

FeatureVector CharLanguageModel::encode(const Utterance& utt, CharPooling pooling) const {
  return char_encode(utt, cell_, vocab_, pooling);
}

CharLanguageModel train_char_lm(std::span<const std::string> texts, const CharLMConfig& cfg,
                                CharLMHistory* history) {
  if (cfg.batch_size == 0 || cfg.max_chars < 2) throw UsageError("invalid char-LM config");
  CharLanguageModel lm(CharVocab::build(texts), cfg.hidden_dim);
  Rng rng(cfg.seed);
  lm.init(rng);

  std::vector<const std::string*> order;
  for (const auto& t : texts)
    if (t.size() >= 2) order.push_back(&t);
  if (order.empty()) return lm;

  const auto params = lm.parameters();
  AdamState adam(params, cfg.learning_rate);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<const std::string*>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (Parameter* p : params) p->zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        Tape tape;
        const Var loss = tape.scale(lm.sequence_loss(tape, *order[i], cfg.max_chars),
                                    1.0 / static_cast<double>(end - start));
        loss_sum += tape.value(loss)(0, 0) * static_cast<double>(end - start);
        tape.backward(loss);
      }
      adam_step(params, adam);
    }
    if (history != nullptr) history->epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return lm;
}

}  // namespace ctxda
