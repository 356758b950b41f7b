#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include "ctxda/corpus.hpp"
#include "ctxda/errors.hpp"

namespace ctxda {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any = false;  // current row has content
  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

TagMap TagMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  TagMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw ParseError("expected 'raw_tag<TAB>normalized_tag'", line_no);
    }
    map.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return map;
}

void TagMap::add(std::string raw, std::string normalized) { map_[std::move(raw)] = std::move(normalized); }

std::optional<std::string> TagMap::lookup(const std::string& raw) const {
  auto it = map_.find(raw);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TagMap::normalized_tags() const {
  std::set<std::string> out;
  for (const auto& [_, v] : map_) out.insert(v);
  return {out.begin(), out.end()};
}

std::optional<std::string> TagMap::normalize(std::string_view raw) const {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view first = raw;
  const auto sep = first.find_first_of(",;");
  if (sep != std::string_view::npos) first = first.substr(0, sep);
  first = trim(first);
  if (auto hit = lookup(std::string(first))) return hit;

  std::string reduced(first);
  const auto caret = reduced.find('^');
  if (caret != std::string::npos && caret > 0) reduced.erase(caret);
  reduced.erase(std::remove_if(reduced.begin(), reduced.end(),
                               [](char c) { return c == '(' || c == ')' || c == '@' || c == '*'; }),
                reduced.end());
  return lookup(reduced);
}

namespace {

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& file) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError(file.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::vector<Conversation> load_swda_csv(const std::filesystem::path& directory,
                                        const TagMap& tag_map, const SwdaCsvOptions& options) {
  if (!std::filesystem::is_directory(directory)) {
    throw ParseError("not a directory: " + directory.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<Conversation> out;
  std::set<std::string> seen;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    auto rows = parse_csv(in);
    if (rows.empty()) continue;
    const auto& header = rows.front();
    const std::size_t text_col = column_index(header, options.text_column, file);
    const std::size_t tag_col = column_index(header, options.tag_column, file);
    const auto conv_it = std::find(header.begin(), header.end(), options.conversation_column);
    const auto spk_it = std::find(header.begin(), header.end(), options.speaker_column);

    Conversation conv;
    conv.id = file.stem().string();
    std::vector<std::string> speakers;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() < header.size()) {
        throw ParseError(file.string() + ": row " + std::to_string(r + 1) + " has " +
                         std::to_string(row.size()) + " fields, header has " +
                         std::to_string(header.size()));
      }
      if (r == 1 && conv_it != header.end()) {
        conv.id = row[static_cast<std::size_t>(conv_it - header.begin())];
      }
      const std::string speaker =
          spk_it != header.end() ? row[static_cast<std::size_t>(spk_it - header.begin())] : "";
      const std::string& raw_tag = row[tag_col];

      if (options.merge_continuations && raw_tag == "+") {
        // Continuation of this speaker's previous segment.
        auto prev = std::find(speakers.rbegin(), speakers.rend(), speaker);
        if (prev != speakers.rend()) {
          const auto idx = static_cast<std::size_t>(speakers.rend() - prev - 1);
          conv.utterances[idx].text += " " + row[text_col];
          continue;
        }
      }
      auto tag = tag_map.normalize(raw_tag);
      if (!tag) {
        throw ParseError(file.string() + ": act tag '" + raw_tag +
                         "' has no entry in the tag map after normalization");
      }
      Utterance u;
      u.text = row[text_col];
      u.act_tag = *tag;
      conv.utterances.push_back(std::move(u));
      speakers.push_back(speaker);
    }
    if (conv.utterances.empty()) continue;
    if (!seen.insert(conv.id).second) throw ParseError("duplicate conversation id '" + conv.id + "'");
    for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
      conv.utterances[i].conversation_id = conv.id;
      conv.utterances[i].index = i;
    }
    out.push_back(std::move(conv));
  }
  return out;
}

std::pair<std::vector<Conversation>, std::vector<Conversation>> split_by_ids(
    std::span<const Conversation> conversations, std::span<const std::string> test_ids) {
  const std::set<std::string> test(test_ids.begin(), test_ids.end());
  std::pair<std::vector<Conversation>, std::vector<Conversation>> out;
  for (const auto& c : conversations) (test.count(c.id) ? out.second : out.first).push_back(c);
  return out;
}

std::vector<std::string> load_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string id;
  while (in >> id) ids.push_back(id);
  return ids;
}

}  // namespace ctxda
