#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ctxda {

struct Utterance {
  std::string conversation_id;
  std::size_t index = 0;  // position within the conversation
  std::string text;
  std::string act_tag;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

/// Fixed-dimension representation of one utterance.
struct FeatureVector {
  FeatureVector() = default;
  explicit FeatureVector(std::size_t dim) : values(dim, 0.0) {}
  explicit FeatureVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const noexcept { return values.size(); }
  bool all_finite() const noexcept;

  std::vector<double> values;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// The current utterance and its n predecessors, oldest first:
/// features[0] = u_{t-n}, ..., features[n] = u_t.
struct ContextWindow {
  std::vector<FeatureVector> features;
  std::vector<bool> pad_mask;  // true = real utterance
  int label = 0;
  std::string conversation_id;
  std::size_t index = 0;

  std::size_t slots() const noexcept { return features.size(); }
  const FeatureVector& current() const { return features.back(); }
};

/// Attention weights indexed by distance from the current utterance:
/// weights[0] = a_0 (u_t), weights[k] = a_k (u_{t-k}).
struct AttentionProfile {
  std::vector<double> weights;
};

struct Prediction {
  std::vector<double> probs;
  std::optional<AttentionProfile> attention;

  int argmax() const;
  double confidence() const;
};

}  // namespace ctxda
