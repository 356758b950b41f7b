#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxda/tape.hpp"
#include "ctxda/tensor.hpp"
#include "ctxda/types.hpp"

namespace ctxda {

/// Lowercases, splits on whitespace, and emits every ASCII punctuation
/// character as its own token: "don't" -> {"don", "'", "t"}.
std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Word embeddings

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Inserts or replaces. Throws DimensionError if the length is not dim().
  void set(const std::string& token, std::vector<double> vec);
  /// nullptr when the token is absent.
  const std::vector<double>* find(const std::string& token) const;
  bool contains(const std::string& token) const { return find(token) != nullptr; }

  /// Tokens in sorted order.
  std::vector<std::string> tokens() const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> entries_;
};

/// Reads "token v1 ... vD" lines, with an optional "count dim" header line.
/// Without a header the dimension comes from the first entry; an empty
/// headerless file is an error. Later duplicates replace earlier ones.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Mean over in-vocabulary tokens; zero vector when none are known.
FeatureVector word_mean_encode(const Utterance& utt, const EmbeddingTable& table);

FeatureVector concat_encode(const FeatureVector& char_part, const FeatureVector& word_part);

// ---------------------------------------------------------------------------
// Character mLSTM

/// Printable ASCII seen in training text, plus UNK at index 0.
class CharVocab {
 public:
  CharVocab();
  static CharVocab build(std::span<const std::string> texts);
  static CharVocab from_chars(std::string_view chars);

  std::size_t size() const noexcept { return chars_.size() + 1; }
  std::size_t index(char c) const;
  /// The known characters in index order (excluding UNK).
  const std::string& chars() const noexcept { return chars_; }

  static constexpr std::size_t kUnk = 0;

 private:
  std::string chars_;
  std::array<std::size_t, 256> lookup_{};
};

struct MLSTMParams {
  MLSTMParams() = default;
  MLSTMParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const noexcept { return w_mx.value.cols(); }
  std::size_t hidden_dim() const noexcept { return w_mx.value.rows(); }

  void init(Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Parameter w_mx, w_mh;                // multiplicative factor
  Parameter w_ix, w_fx, w_ox, w_cx;    // gates from the input
  Parameter w_im, w_fm, w_om, w_cm;    // gates from the multiplicative state
  Parameter b_i, b_f, b_o, b_c;
};

/// MLSTMParams recorded on a tape. The const overload records the weights
/// as constants (inference only, no gradients).
struct MLSTMVars {
  MLSTMVars(Tape& tape, MLSTMParams& p);
  MLSTMVars(Tape& tape, const MLSTMParams& p);
  Var w_mx, w_mh, w_ix, w_fx, w_ox, w_cx, w_im, w_fm, w_om, w_cm, b_i, b_f, b_o, b_c;
};

struct MLSTMStateVars {
  Var h;
  Var c;
};

/// One cell step on a tape. x is (input_dim x B), h_prev/c_prev (hidden_dim x B).
///   m = (W_mx x) * (W_mh h_prev)
///   i, f, o = sigmoid(W_*x x + W_*m m + b_*),  g = tanh(W_cx x + W_cm m + b_c)
///   c = f * c_prev + i * g,  h = o * tanh(c)
MLSTMStateVars mlstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const MLSTMVars& p);

struct MLSTMState {
  Tensor2D h;
  Tensor2D c;
};

/// Single-column convenience form; x_onehot is (input_dim x 1).
MLSTMState mlstm_step(const Tensor2D& x_onehot, const MLSTMState& prev, const MLSTMParams& p);

/// One-hot column (vocab.size() x 1) for character c.
Tensor2D one_hot(const CharVocab& vocab, char c);

enum class CharPooling { kMean, kLast };

/// Runs the cell over the characters of utt from a zero state and pools the
/// hidden states. Empty text yields the zero vector.
FeatureVector char_encode(const Utterance& utt, const MLSTMParams& p, const CharVocab& vocab,
                          CharPooling pooling = CharPooling::kMean);

// ---------------------------------------------------------------------------
// Precomputed per-utterance features

/// Keyed by (conversation_id, utterance index).
class PrecomputedFeatures {
 public:
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }

  void set(const std::string& conversation_id, std::size_t index, std::vector<double> values);
  const std::vector<double>* find(const std::string& conversation_id, std::size_t index) const;

  const std::map<std::pair<std::string, std::size_t>, std::vector<double>>& entries() const {
    return entries_;
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> entries_;
};

/// "conversation_id TAB utterance_index TAB v1,v2,...,vD" per line.
PrecomputedFeatures load_precomputed_features(const std::filesystem::path& path);
void save_precomputed_features(const PrecomputedFeatures& features,
                               const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Encoder front-ends

enum class EncoderKind { kWord, kChar, kConcat, kPrecomputed };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

class UtteranceEncoder {
 public:
  virtual ~UtteranceEncoder() = default;
  virtual EncoderKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual FeatureVector encode(const Utterance& utt) const = 0;
};

class WordMeanEncoder final : public UtteranceEncoder {
 public:
  explicit WordMeanEncoder(std::shared_ptr<const EmbeddingTable> table);
  EncoderKind kind() const override { return EncoderKind::kWord; }
  std::size_t dim() const override { return table_->dim(); }
  FeatureVector encode(const Utterance& utt) const override;

 private:
  std::shared_ptr<const EmbeddingTable> table_;
};

class CharLanguageModel;

class CharEncoder final : public UtteranceEncoder {
 public:
  explicit CharEncoder(std::shared_ptr<const CharLanguageModel> lm,
                       CharPooling pooling = CharPooling::kMean);
  EncoderKind kind() const override { return EncoderKind::kChar; }
  std::size_t dim() const override;
  FeatureVector encode(const Utterance& utt) const override;

 private:
  std::shared_ptr<const CharLanguageModel> lm_;
  CharPooling pooling_;
};

class ConcatEncoder final : public UtteranceEncoder {
 public:
  ConcatEncoder(std::shared_ptr<const UtteranceEncoder> char_part,
                std::shared_ptr<const UtteranceEncoder> word_part);
  EncoderKind kind() const override { return EncoderKind::kConcat; }
  std::size_t dim() const override { return char_->dim() + word_->dim(); }
  FeatureVector encode(const Utterance& utt) const override;

 private:
  std::shared_ptr<const UtteranceEncoder> char_;
  std::shared_ptr<const UtteranceEncoder> word_;
};

class PrecomputedEncoder final : public UtteranceEncoder {
 public:
  explicit PrecomputedEncoder(std::shared_ptr<const PrecomputedFeatures> features);
  EncoderKind kind() const override { return EncoderKind::kPrecomputed; }
  std::size_t dim() const override { return features_->dim(); }
  /// Throws UsageError when the utterance has no stored vector.
  FeatureVector encode(const Utterance& utt) const override;

 private:
  std::shared_ptr<const PrecomputedFeatures> features_;
};

}  // namespace ctxda
