#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxda/encoders.hpp"
#include "ctxda/types.hpp"

namespace ctxda {

// ---------------------------------------------------------------------------
// Tag vocabulary

class TagVocabulary {
 public:
  TagVocabulary() = default;
  /// Keeps the given order. Throws UsageError on duplicates or empty tags.
  explicit TagVocabulary(std::vector<std::string> tags);
  /// Sorted distinct act tags of `conversations`.
  static TagVocabulary build(std::span<const Conversation> conversations);

  std::size_t size() const noexcept { return tags_.size(); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  const std::string& tag(int index) const { return tags_.at(static_cast<std::size_t>(index)); }
  std::optional<int> find(const std::string& tag) const;
  /// Throws UsageError for unknown tags.
  int index(const std::string& tag) const;

  /// One tag per line.
  void save(const std::filesystem::path& path) const;
  static TagVocabulary load(const std::filesystem::path& path);

  friend bool operator==(const TagVocabulary& a, const TagVocabulary& b) { return a.tags_ == b.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// JSONL conversations: {"id": ..., "utterances": [{"text": ..., "act_tag": ...}, ...]}

std::vector<Conversation> parse_jsonl(std::istream& in);
std::vector<Conversation> load_jsonl(const std::filesystem::path& path);
void write_jsonl(std::span<const Conversation> conversations, std::ostream& out);
void write_jsonl(std::span<const Conversation> conversations, const std::filesystem::path& path);

struct CorpusStats {
  std::size_t conversations = 0;
  std::size_t utterances = 0;
  std::size_t distinct_tags = 0;
};

CorpusStats corpus_stats(std::span<const Conversation> conversations);

// ---------------------------------------------------------------------------
// SwDA-style CSV adapter

/// Reads RFC 4180 CSV (quoted fields may hold commas, quotes and newlines).
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// "raw_tag TAB normalized_tag" lines; '#' starts a comment.
class TagMap {
 public:
  static TagMap load(const std::filesystem::path& path);
  void add(std::string raw, std::string normalized);

  std::optional<std::string> lookup(const std::string& raw) const;
  /// Distinct normalized tags, sorted.
  std::vector<std::string> normalized_tags() const;

  /// Reduces a raw DAMSL annotation to a clustered tag: keep the first of
  /// several ','/';'-separated tags, look it up, else drop a "^suffix"
  /// (when something precedes the '^') and the characters ()@* and look up
  /// again. Returns nullopt when neither lookup succeeds.
  std::optional<std::string> normalize(std::string_view raw) const;

 private:
  std::map<std::string, std::string> map_;
};

struct SwdaCsvOptions {
  std::string text_column = "text";
  std::string tag_column = "act_tag";
  std::string conversation_column = "conversation_no";
  std::string speaker_column = "caller";
  /// Fold "+" (continuation) utterances into the same speaker's previous
  /// utterance, which keeps its own tag.
  bool merge_continuations = true;
};

/// Every *.csv under `directory` (recursively, sorted by path) is one
/// conversation. Tags are normalized through `tag_map`; an unnormalizable tag
/// throws ParseError naming it and the file.
std::vector<Conversation> load_swda_csv(const std::filesystem::path& directory,
                                        const TagMap& tag_map, const SwdaCsvOptions& options = {});

/// Splits by conversation id: ids listed in `test_ids` go to the second list.
std::pair<std::vector<Conversation>, std::vector<Conversation>> split_by_ids(
    std::span<const Conversation> conversations, std::span<const std::string> test_ids);

/// Reads whitespace-separated conversation ids.
std::vector<std::string> load_id_list(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Context windows

/// One window per utterance with `n` preceding slots; slots before the start
/// of the conversation are zero vectors with pad_mask false.
std::vector<ContextWindow> build_windows(const Conversation& conv, std::size_t n,
                                         const UtteranceEncoder& encoder,
                                         const TagVocabulary& vocab);

std::vector<ContextWindow> build_windows(std::span<const Conversation> conversations,
                                         std::size_t n, const UtteranceEncoder& encoder,
                                         const TagVocabulary& vocab);

/// Percent accuracy of always predicting the most frequent training tag (ties
/// broken lexicographically).
double majority_baseline(std::span<const std::string> train_tags,
                         std::span<const std::string> test_tags);

std::vector<std::string> all_tags(std::span<const Conversation> conversations);

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class LabelRule {
  /// y_t = (c_{t-1} + 1) mod K; the text of u_t carries only its own class c_t.
  kPreviousClass,
  /// y_t = c_t; context carries no label information.
  kCurrentClass,
  /// Long utterances reveal their own label; short ones use a class-neutral
  /// vocabulary and take (y_{t-1} + 1) mod K.
  kShortAmbiguous,
};

std::string to_string(LabelRule rule);
LabelRule parse_label_rule(std::string_view name);

struct SyntheticSpec {
  std::size_t num_classes = 6;
  std::size_t words_per_class = 6;
  std::size_t filler_words = 8;
  std::size_t short_words = 4;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 6;
  double noise = 0.1;  // probability that a content token is replaced by filler
  LabelRule rule = LabelRule::kPreviousClass;
  double short_fraction = 0.35;  // kShortAmbiguous only
  std::size_t num_conversations = 100;
  std::size_t conversation_length = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Tag name for class k ("c0", "c1", ...).
std::string synthetic_tag(std::size_t k);

std::vector<Conversation> generate_synthetic(const SyntheticSpec& spec);

/// Random Gaussian embeddings for every word the generator can emit.
EmbeddingTable synthetic_embeddings(const SyntheticSpec& spec, std::size_t dim,
                                    std::uint64_t seed);

/// Best achievable accuracy for a classifier that sees only the current
/// utterance, from the generator's label marginals. Defined for
/// kPreviousClass, where the current text is independent of the label.
double bayes_no_context_accuracy(const SyntheticSpec& spec);

}  // namespace ctxda
