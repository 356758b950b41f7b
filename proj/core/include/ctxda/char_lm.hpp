#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxda/encoders.hpp"

namespace ctxda {

struct CharLMConfig {
  std::size_t hidden_dim = 64;
  int epochs = 3;
  double learning_rate = 2e-3;
  std::size_t max_chars = 64;  // longer texts are truncated for training
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
};

/// Character mLSTM trained as a next-character predictor; its hidden
/// states serve as utterance features.
class CharLanguageModel {
 public:
  CharLanguageModel() = default;
  CharLanguageModel(CharVocab vocab, std::size_t hidden_dim);

  const CharVocab& vocab() const noexcept { return vocab_; }
  std::size_t hidden_dim() const noexcept { return cell_.hidden_dim(); }

  MLSTMParams& cell() noexcept { return cell_; }
  const MLSTMParams& cell() const noexcept { return cell_; }
  Parameter& w_out() noexcept { return w_out_; }
  Parameter& b_out() noexcept { return b_out_; }
  const Parameter& w_out() const noexcept { return w_out_; }
  const Parameter& b_out() const noexcept { return b_out_; }

  void init(Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// Mean next-character cross-entropy over `text` (truncated to max_chars),
  /// recorded on `tape`. Returns an invalid Var for texts shorter than 2.
  Var sequence_loss(Tape& tape, const std::string& text, std::size_t max_chars);

  FeatureVector encode(const Utterance& utt, CharPooling pooling = CharPooling::kMean) const;

 private:
  CharVocab vocab_;
  MLSTMParams cell_;
  Parameter w_out_;
  Parameter b_out_;
};

struct CharLMHistory {
  std::vector<double> epoch_loss;
};

/// Builds a vocabulary from `texts` and fits the model with Adam.
CharLanguageModel train_char_lm(std::span<const std::string> texts, const CharLMConfig& cfg,
                                CharLMHistory* history = nullptr);

}  // namespace ctxda
