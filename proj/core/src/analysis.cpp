#include "ctxda/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

#include "ctxda/encoders.hpp"
#include "ctxda/errors.hpp"
#include "json.hpp"

namespace ctxda {

using json = nlohmann::json;

bool operator==(const EvalRecord& a, const EvalRecord& b) {
  auto weights = [](const EvalRecord& r) {
    return r.attention ? std::optional<std::vector<double>>(r.attention->weights) : std::nullopt;
  };
  return a.conversation_id == b.conversation_id && a.index == b.index && a.gold == b.gold &&
         a.nc == b.nc && a.wc == b.wc && a.nc_probs == b.nc_probs && a.wc_probs == b.wc_probs &&
         weights(a) == weights(b) && a.num_tokens == b.num_tokens;
}

std::vector<EvalRecord> make_eval_records(std::span<const ContextWindow> windows,
                                          std::span<const Prediction> nc,
                                          std::span<const Prediction> wc,
                                          const TagVocabulary& tags,
                                          std::span<const Conversation> conversations) {
  if (nc.size() != windows.size() || wc.size() != windows.size()) {
    throw UsageError("need one NC and one WC prediction per window");
  }
  std::map<std::string, const Conversation*> by_id;
  for (const auto& c : conversations) by_id[c.id] = &c;

  std::vector<EvalRecord> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    EvalRecord r;
    r.conversation_id = w.conversation_id;
    r.index = w.index;
    r.gold = tags.tag(w.label);
    r.nc = tags.tag(nc[i].argmax());
    r.wc = tags.tag(wc[i].argmax());
    r.nc_probs = nc[i].probs;
    r.wc_probs = wc[i].probs;
    r.attention = wc[i].attention;
    auto it = by_id.find(w.conversation_id);
    if (it == by_id.end() || w.index >= it->second->utterances.size()) {
      throw UsageError("no utterance " + w.conversation_id + "#" + std::to_string(w.index));
    }
    r.num_tokens = tokenize(it->second->utterances[w.index].text).size();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> parse_records(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      EvalRecord r;
      r.conversation_id = j.at("conversation_id").get<std::string>();
      r.index = j.at("index").get<std::size_t>();
      r.gold = j.at("gold").get<std::string>();
      r.nc = j.at("nc").get<std::string>();
      r.wc = j.at("wc").get<std::string>();
      r.nc_probs = j.value("nc_probs", std::vector<double>{});
      r.wc_probs = j.value("wc_probs", std::vector<double>{});
      if (j.contains("attention") && !j["attention"].is_null()) {
        r.attention = AttentionProfile{j["attention"].get<std::vector<double>>()};
      }
      r.num_tokens = j.value("num_tokens", std::size_t{0});
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad evaluation record: ") + e.what(), line_no);
    }
  }
  return out;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return parse_records(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_records(std::span<const EvalRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    json j = {{"conversation_id", r.conversation_id},
              {"index", r.index},
              {"gold", r.gold},
              {"nc", r.nc},
              {"wc", r.wc},
              {"nc_probs", r.nc_probs},
              {"wc_probs", r.wc_probs},
              {"attention", r.attention ? json(r.attention->weights) : json()},
              {"num_tokens", r.num_tokens}};
    out << j.dump() << '\n';
  }
}

void write_records(std::span<const EvalRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  write_records(records, out);
}

// ---------------------------------------------------------------------------

double round2(double x) { return std::round(x * 100.0) / 100.0; }

double percent2(std::size_t part, std::size_t total) {
  if (total == 0) throw UsageError("percentage of an empty total");
  // Integer rounding of 10000 * part / total keeps the result exact.
  const unsigned long long scaled = (20000ULL * part + total) / (2ULL * total);
  return static_cast<double>(scaled) / 100.0;
}

AccuracySummary accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw UsageError("accuracy of an empty record set");
  std::size_t nc = 0;
  std::size_t wc = 0;
  for (const auto& r : records) {
    nc += r.nc_correct();
    wc += r.wc_correct();
  }
  const double n = static_cast<double>(records.size());
  return {100.0 * static_cast<double>(nc) / n, 100.0 * static_cast<double>(wc) / n};
}

Prediction ensemble_average(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw UsageError("ensemble of zero predictions");
  const std::size_t k = predictions.front().probs.size();
  Prediction out;
  out.probs.assign(k, 0.0);
  for (const auto& p : predictions) {
    if (p.probs.size() != k) {
      throw UsageError("ensemble members disagree on class count (" + std::to_string(k) + " vs " +
                       std::to_string(p.probs.size()) + ")");
    }
    for (std::size_t i = 0; i < k; ++i) out.probs[i] += p.probs[i];
  }
  for (double& v : out.probs) v /= static_cast<double>(predictions.size());
  return out;
}

namespace {

template <typename Pred>
std::vector<ConfusionPairRow> group_pairs(std::span<const EvalRecord> records, Pred keep) {
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> counts;
  for (const auto& r : records)
    if (keep(r)) ++counts[{r.gold, r.nc, r.wc}];
  std::vector<ConfusionPairRow> rows;
  for (const auto& [key, num] : counts) {
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), num,
                    percent2(num, records.size())});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ConfusionPairRow& a, const ConfusionPairRow& b) { return a.num > b.num; });
  return rows;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<ConfusionPairRow> failure_pairs(std::span<const EvalRecord> records) {
  return group_pairs(records, [](const EvalRecord& r) { return !r.nc_correct() && !r.wc_correct(); });
}

RescueTable rescue_pairs(std::span<const EvalRecord> records) {
  RescueTable t;
  t.rows = group_pairs(records, [](const EvalRecord& r) { return r.wc_correct() && !r.nc_correct(); });
  for (const auto& row : t.rows) t.total += row.num;
  if (!records.empty()) t.pct = percent2(t.total, records.size());
  return t;
}

void write_pairs_csv(std::span<const ConfusionPairRow> rows, std::ostream& out) {
  out << "gt,nc,wc,num,pct\n";
  for (const auto& r : rows) {
    out << r.gt << ',' << r.nc << ',' << r.wc << ',' << r.num << ',' << fixed2(r.pct) << '\n';
  }
}

ConfidenceStats confidence_stats(std::span<const EvalRecord> records) {
  ConfidenceStats s;
  for (const auto& r : records) {
    s.nc_series.push_back(r.nc_probs.empty() ? 0.0 : *std::max_element(r.nc_probs.begin(), r.nc_probs.end()));
    s.wc_series.push_back(r.wc_probs.empty() ? 0.0 : *std::max_element(r.wc_probs.begin(), r.wc_probs.end()));
  }
  s.nc_mean = mean(s.nc_series);
  s.wc_mean = mean(s.wc_series);
  s.nc_median = median(s.nc_series);
  s.wc_median = median(s.wc_series);
  return s;
}

void write_confidence_csv(const ConfidenceStats& stats, std::ostream& out) {
  char buf[96];
  out << "index,nc_confidence,wc_confidence\n";
  for (std::size_t i = 0; i < stats.nc_series.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", i, stats.nc_series[i], stats.wc_series[i]);
    out << buf;
  }
}

std::vector<double> attention_profile_mean(std::span<const EvalRecord> records) {
  if (records.empty()) throw UsageError("attention mean over no records");
  std::vector<double> sum;
  for (const auto& r : records) {
    if (!r.attention) {
      throw UsageError("record " + r.conversation_id + "#" + std::to_string(r.index) +
                       " has no attention profile");
    }
    const auto& w = r.attention->weights;
    if (sum.empty()) sum.assign(w.size(), 0.0);
    if (w.size() != sum.size()) throw UsageError("attention profiles differ in length");
    for (std::size_t k = 0; k < w.size(); ++k) sum[k] += w[k];
  }
  for (double& v : sum) v /= static_cast<double>(records.size());
  return sum;
}

std::vector<double> attention_profile_mean(std::span<const std::vector<EvalRecord>> runs) {
  if (runs.empty()) throw UsageError("attention mean over no runs");
  std::vector<double> sum;
  for (const auto& run : runs) {
    const auto m = attention_profile_mean(std::span<const EvalRecord>(run));
    if (sum.empty()) sum.assign(m.size(), 0.0);
    if (m.size() != sum.size()) throw UsageError("attention profiles differ in length across runs");
    for (std::size_t k = 0; k < m.size(); ++k) sum[k] += m[k];
  }
  for (double& v : sum) v /= static_cast<double>(runs.size());
  return sum;
}

ShortSlice short_utterance_slice(std::span<const EvalRecord> records, std::size_t max_tokens) {
  ShortSlice out;
  out.full = attention_profile_mean(records);
  std::vector<EvalRecord> picked;
  for (const auto& r : records)
    if (r.num_tokens <= max_tokens) picked.push_back(r);
  out.count = picked.size();
  if (!picked.empty()) out.slice = attention_profile_mean(std::span<const EvalRecord>(picked));
  return out;
}

void write_profile_csv(std::span<const double> profile, std::ostream& out) {
  char buf[64];
  out << "slot,weight\n";
  for (std::size_t k = 0; k < profile.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", k, profile[k]);
    out << buf;
  }
}

}  // namespace ctxda
