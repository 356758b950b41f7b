#include <cmath>
#include <stdexcept>

#include "ctxda/corpus.hpp"
#include "ctxda/errors.hpp"
#include "ctxda/rng.hpp"

namespace ctxda {

std::string to_string(LabelRule rule) {
  switch (rule) {
    case LabelRule::kPreviousClass: return "previous";
    case LabelRule::kCurrentClass: return "current";
    case LabelRule::kShortAmbiguous: return "short";
  }
  return "?";
}

LabelRule parse_label_rule(std::string_view name) {
  if (name == "previous") return LabelRule::kPreviousClass;
  if (name == "current") return LabelRule::kCurrentClass;
  if (name == "short") return LabelRule::kShortAmbiguous;
  throw UsageError("unknown label rule '" + std::string(name) + "' (previous|current|short)");
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw UsageError("synthetic corpus needs at least two classes");
  if (words_per_class == 0) throw UsageError("words_per_class must be positive");
  if (min_tokens == 0 || max_tokens < min_tokens) throw UsageError("invalid token range");
  if (!(noise >= 0.0 && noise < 1.0)) throw UsageError("noise must be in [0, 1)");
  if (noise > 0.0 && filler_words == 0) throw UsageError("noise needs filler words");
  if (conversation_length == 0) throw UsageError("synthetic conversations need utterances");
  if (rule == LabelRule::kShortAmbiguous) {
    if (short_words == 0) throw UsageError("short rule needs short words");
    if (!(short_fraction >= 0.0 && short_fraction <= 1.0)) {
      throw UsageError("short_fraction must be in [0, 1]");
    }
  }
}

std::string synthetic_tag(std::size_t k) { return "c" + std::to_string(k); }

namespace {

std::string class_word(std::size_t k, std::size_t j) {
  return "k" + std::to_string(k) + "w" + std::to_string(j);
}
std::string filler_word(std::size_t j) { return "f" + std::to_string(j); }
std::string short_word(std::size_t j) { return "s" + std::to_string(j); }

std::string class_text(const SyntheticSpec& spec, std::size_t k, Rng& rng) {
  const std::size_t len =
      spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
  std::string text;
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) text += ' ';
    if (spec.noise > 0.0 && rng.bernoulli(spec.noise)) {
      text += filler_word(rng.below(spec.filler_words));
    } else {
      text += class_word(k, rng.below(spec.words_per_class));
    }
  }
  return text;
}

std::string short_text(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t len = 1 + rng.below(2);
  std::string text = short_word(rng.below(spec.short_words));
  if (len == 2) text += " " + short_word(rng.below(spec.short_words));
  return text;
}

}  // namespace

std::vector<Conversation> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t K = spec.num_classes;
  Rng rng(spec.seed);
  std::vector<Conversation> out;
  out.reserve(spec.num_conversations);
  for (std::size_t ci = 0; ci < spec.num_conversations; ++ci) {
    Conversation conv;
    conv.id = "syn" + std::to_string(ci);
    std::size_t prev_class = 0;
    std::size_t prev_label = 0;
    bool prev_short = false;
    for (std::size_t t = 0; t < spec.conversation_length; ++t) {
      Utterance u;
      u.conversation_id = conv.id;
      u.index = t;
      std::size_t label = 0;
      switch (spec.rule) {
        case LabelRule::kPreviousClass: {
          const std::size_t c = rng.below(K);
          u.text = class_text(spec, c, rng);
          label = t == 0 ? 0 : (prev_class + 1) % K;
          prev_class = c;
          break;
        }
        case LabelRule::kCurrentClass: {
          label = rng.below(K);
          u.text = class_text(spec, label, rng);
          break;
        }
        case LabelRule::kShortAmbiguous: {
          const bool is_short = t > 0 && !prev_short && rng.bernoulli(spec.short_fraction);
          if (is_short) {
            label = (prev_label + 1) % K;
            u.text = short_text(spec, rng);
          } else {
            label = rng.below(K);
            u.text = class_text(spec, label, rng);
          }
          prev_short = is_short;
          break;
        }
      }
      prev_label = label;
      u.act_tag = synthetic_tag(label);
      conv.utterances.push_back(std::move(u));
    }
    out.push_back(std::move(conv));
  }
  return out;
}

EmbeddingTable synthetic_embeddings(const SyntheticSpec& spec, std::size_t dim,
                                    std::uint64_t seed) {
  if (dim == 0) throw UsageError("embedding dimension must be positive");
  Rng rng(seed);
  EmbeddingTable table(dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  auto add = [&](const std::string& token) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal() * scale;
    table.set(token, std::move(v));
  };
  for (std::size_t k = 0; k < spec.num_classes; ++k)
    for (std::size_t j = 0; j < spec.words_per_class; ++j) add(class_word(k, j));
  for (std::size_t j = 0; j < spec.filler_words; ++j) add(filler_word(j));
  for (std::size_t j = 0; j < spec.short_words; ++j) add(short_word(j));
  return table;
}

double bayes_no_context_accuracy(const SyntheticSpec& spec) {
  if (spec.rule != LabelRule::kPreviousClass) {
    throw UsageError("no-context Bayes accuracy is only defined for the previous-class rule");
  }
  // Label 0 has mass 1/L (first utterance) + (L-1)/(L K); others less.
  const double L = static_cast<double>(spec.conversation_length);
  const double K = static_cast<double>(spec.num_classes);
  return 100.0 * (1.0 / L + (L - 1.0) / (L * K));
}

}  // namespace ctxda
