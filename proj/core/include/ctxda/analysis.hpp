#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxda/corpus.hpp"
#include "ctxda/types.hpp"

namespace ctxda {

/// One test utterance scored by the no-context (NC) and context (WC) models.
struct EvalRecord {
  std::string conversation_id;
  std::size_t index = 0;
  std::string gold;
  std::string nc;
  std::string wc;
  std::vector<double> nc_probs;
  std::vector<double> wc_probs;
  std::optional<AttentionProfile> attention;  // WC weights, a_0 first
  std::size_t num_tokens = 0;                 // of the current utterance

  bool nc_correct() const { return nc == gold; }
  bool wc_correct() const { return wc == gold; }

  friend bool operator==(const EvalRecord& a, const EvalRecord& b);
};

/// Pairs windows with both models' predictions. Token counts come from the
/// matching utterance in `conversations`.
std::vector<EvalRecord> make_eval_records(std::span<const ContextWindow> windows,
                                          std::span<const Prediction> nc,
                                          std::span<const Prediction> wc,
                                          const TagVocabulary& tags,
                                          std::span<const Conversation> conversations);

std::vector<EvalRecord> parse_records(std::istream& in);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);
void write_records(std::span<const EvalRecord> records, std::ostream& out);
void write_records(std::span<const EvalRecord> records, const std::filesystem::path& path);

/// Rounds half away from zero to two decimals.
double round2(double x);

/// 100 * part / total, rounded to two decimals.
double percent2(std::size_t part, std::size_t total);

struct AccuracySummary {
  double nc = 0.0;
  double wc = 0.0;
};

/// Unrounded percentages. Throws UsageError when `records` is empty.
AccuracySummary accuracy(std::span<const EvalRecord> records);

/// Elementwise mean of the probability vectors. Throws UsageError on an empty
/// list or mismatched lengths.
Prediction ensemble_average(std::span<const Prediction> predictions);

struct ConfusionPairRow {
  std::string gt;
  std::string nc;
  std::string wc;
  std::size_t num = 0;
  double pct = 0.0;  // 100 * num / total, two decimals

  friend bool operator==(const ConfusionPairRow&, const ConfusionPairRow&) = default;
};

/// Records where both models are wrong, grouped by (gt, nc, wc), sorted by
/// num descending then by tags. pct is over all records.
std::vector<ConfusionPairRow> failure_pairs(std::span<const EvalRecord> records);

struct RescueTable {
  std::vector<ConfusionPairRow> rows;
  std::size_t total = 0;
  double pct = 0.0;
};

/// Records where WC is right and NC is wrong.
RescueTable rescue_pairs(std::span<const EvalRecord> records);

void write_pairs_csv(std::span<const ConfusionPairRow> rows, std::ostream& out);

struct ConfidenceStats {
  double nc_mean = 0.0;
  double nc_median = 0.0;
  double wc_mean = 0.0;
  double wc_median = 0.0;
  std::vector<double> nc_series;  // max probability per record, in record order
  std::vector<double> wc_series;
};

ConfidenceStats confidence_stats(std::span<const EvalRecord> records);

/// "index,nc_confidence,wc_confidence" rows.
void write_confidence_csv(const ConfidenceStats& stats, std::ostream& out);

/// Per-slot mean of the records' attention profiles (a_0 first). Throws
/// UsageError when a record has no profile, profiles differ in length, or
/// `records` is empty.
std::vector<double> attention_profile_mean(std::span<const EvalRecord> records);

/// Mean of the per-run means.
std::vector<double> attention_profile_mean(std::span<const std::vector<EvalRecord>> runs);

struct ShortSlice {
  std::vector<double> full;                 // mean over all records
  std::optional<std::vector<double>> slice; // absent when no record qualifies
  std::size_t count = 0;                    // records in the slice
};

/// Attention mean over records whose current utterance has at most
/// `max_tokens` tokens, next to the full-set mean.
ShortSlice short_utterance_slice(std::span<const EvalRecord> records, std::size_t max_tokens);

/// "slot,weight" rows, slot 0 = current utterance.
void write_profile_csv(std::span<const double> profile, std::ostream& out);

}  // namespace ctxda
