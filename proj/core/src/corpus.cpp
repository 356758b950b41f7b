#include "ctxda/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "ctxda/errors.hpp"
#include "json.hpp"

namespace ctxda {

using json = nlohmann::json;

TagVocabulary::TagVocabulary(std::vector<std::string> tags) : tags_(std::move(tags)) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i].empty()) throw UsageError("empty act tag in vocabulary");
    if (!index_.emplace(tags_[i], static_cast<int>(i)).second) {
      throw UsageError("duplicate act tag '" + tags_[i] + "' in vocabulary");
    }
  }
}

TagVocabulary TagVocabulary::build(std::span<const Conversation> conversations) {
  std::set<std::string> tags;
  for (const auto& c : conversations)
    for (const auto& u : c.utterances) tags.insert(u.act_tag);
  return TagVocabulary(std::vector<std::string>(tags.begin(), tags.end()));
}

std::optional<int> TagVocabulary::find(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int TagVocabulary::index(const std::string& tag) const {
  auto found = find(tag);
  if (!found) throw UsageError("act tag '" + tag + "' is not in the tag vocabulary");
  return *found;
}

void TagVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& t : tags_) out << t << '\n';
}

TagVocabulary TagVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tags.push_back(line);
  }
  return TagVocabulary(std::move(tags));
}

// ---------------------------------------------------------------------------

std::vector<Conversation> parse_jsonl(std::istream& in) {
  std::vector<Conversation> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("utterances")) {
      throw ParseError("expected an object with \"id\" and \"utterances\"", line_no);
    }
    Conversation conv;
    if (j["id"].is_string()) {
      conv.id = j["id"].get<std::string>();
    } else if (j["id"].is_number_integer()) {
      conv.id = std::to_string(j["id"].get<long long>());
    } else {
      throw ParseError("\"id\" must be a string", line_no);
    }
    if (conv.id.empty()) throw ParseError("empty conversation id", line_no);
    if (!seen.insert(conv.id).second) {
      throw ParseError("duplicate conversation id '" + conv.id + "'", line_no);
    }
    const json& utts = j["utterances"];
    if (!utts.is_array()) throw ParseError("\"utterances\" must be an array", line_no);
    if (utts.empty()) throw ParseError("conversation '" + conv.id + "' has no utterances", line_no);
    for (const json& u : utts) {
      if (!u.is_object() || !u.contains("text") || !u.contains("act_tag") ||
          !u["text"].is_string() || !u["act_tag"].is_string()) {
        throw ParseError("utterance in '" + conv.id + "' needs string \"text\" and \"act_tag\"",
                         line_no);
      }
      Utterance utt;
      utt.conversation_id = conv.id;
      utt.index = conv.utterances.size();
      utt.text = u["text"].get<std::string>();
      utt.act_tag = u["act_tag"].get<std::string>();
      if (utt.act_tag.empty()) throw ParseError("empty act tag in '" + conv.id + "'", line_no);
      conv.utterances.push_back(std::move(utt));
    }
    out.push_back(std::move(conv));
  }
  return out;
}

std::vector<Conversation> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return parse_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_jsonl(std::span<const Conversation> conversations, std::ostream& out) {
  for (const auto& c : conversations) {
    json utts = json::array();
    for (const auto& u : c.utterances) utts.push_back({{"text", u.text}, {"act_tag", u.act_tag}});
    out << json{{"id", c.id}, {"utterances", std::move(utts)}}.dump() << '\n';
  }
}

void write_jsonl(std::span<const Conversation> conversations, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  write_jsonl(conversations, out);
}

CorpusStats corpus_stats(std::span<const Conversation> conversations) {
  CorpusStats s;
  std::set<std::string> tags;
  s.conversations = conversations.size();
  for (const auto& c : conversations) {
    s.utterances += c.utterances.size();
    for (const auto& u : c.utterances) tags.insert(u.act_tag);
  }
  s.distinct_tags = tags.size();
  return s;
}

// ---------------------------------------------------------------------------

std::vector<ContextWindow> build_windows(const Conversation& conv, std::size_t n,
                                         const UtteranceEncoder& encoder,
                                         const TagVocabulary& vocab) {
  const std::size_t dim = encoder.dim();
  std::vector<FeatureVector> encoded;
  encoded.reserve(conv.utterances.size());
  for (const auto& u : conv.utterances) {
    encoded.push_back(encoder.encode(u));
    if (encoded.back().dim() != dim) {
      throw DimensionError("encoder produced " + std::to_string(encoded.back().dim()) +
                           " values, declared " + std::to_string(dim));
    }
  }

  std::vector<ContextWindow> out;
  out.reserve(conv.utterances.size());
  for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
    ContextWindow w;
    w.features.reserve(n + 1);
    w.pad_mask.reserve(n + 1);
    for (std::size_t back = n + 1; back-- > 0;) {
      if (back > t) {
        w.features.emplace_back(dim);
        w.pad_mask.push_back(false);
      } else {
        w.features.push_back(encoded[t - back]);
        w.pad_mask.push_back(true);
      }
    }
    w.label = vocab.index(conv.utterances[t].act_tag);
    w.conversation_id = conv.id;
    w.index = t;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ContextWindow> build_windows(std::span<const Conversation> conversations,
                                         std::size_t n, const UtteranceEncoder& encoder,
                                         const TagVocabulary& vocab) {
  std::vector<ContextWindow> out;
  for (const auto& c : conversations) {
    auto w = build_windows(c, n, encoder, vocab);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

double majority_baseline(std::span<const std::string> train_tags,
                         std::span<const std::string> test_tags) {
  if (train_tags.empty() || test_tags.empty()) throw UsageError("majority baseline needs tags");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : train_tags) ++counts[t];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  const auto hits = std::count(test_tags.begin(), test_tags.end(), best->first);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(test_tags.size());
}

std::vector<std::string> all_tags(std::span<const Conversation> conversations) {
  std::vector<std::string> out;
  for (const auto& c : conversations)
    for (const auto& u : c.utterances) out.push_back(u.act_tag);
  return out;
}

}  // namespace ctxda
