#include "ctxda/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "ctxda/char_lm.hpp"
#include "ctxda/errors.hpp"

namespace ctxda {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  // std::from_chars for double is available in libstdc++ 11.
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------

void EmbeddingTable::set(const std::string& token, std::vector<double> vec) {
  if (vec.size() != dim_) {
    throw DimensionError("embedding for '" + token + "' has " + std::to_string(vec.size()) +
                         " values, table dim is " + std::to_string(dim_));
  }
  entries_[token] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = entries_.find(token);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> EmbeddingTable::tokens() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [tok, _] : entries_) out.push_back(tok);
  std::sort(out.begin(), out.end());
  return out;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0, dim = 0;
      if (parse_size(fields[0], count) && parse_size(fields[1], dim)) {
        if (dim == 0) throw ParseError("header declares dimension 0", line_no);
        table.emplace(dim);
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError("expected a token followed by values", line_no);
    const std::size_t n = fields.size() - 1;
    if (!table) table.emplace(n);
    if (n != table->dim()) {
      throw ParseError("expected " + std::to_string(table->dim()) + " values, found " +
                           std::to_string(n),
                       line_no);
    }
    std::vector<double> vec(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_double(fields[i + 1], vec[i]) || !std::isfinite(vec[i])) {
        throw ParseError("bad number '" + std::string(fields[i + 1]) + "'", line_no);
      }
    }
    table->set(std::string(fields[0]), std::move(vec));
  }
  if (!table) throw ParseError("empty embedding file without a 'count dim' header: " + path.string());
  return std::move(*table);
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  for (const auto& tok : table.tokens()) {
    out << tok;
    for (double v : *table.find(tok)) out << ' ' << format_double(v);
    out << '\n';
  }
}

FeatureVector word_mean_encode(const Utterance& utt, const EmbeddingTable& table) {
  FeatureVector out(table.dim());
  std::size_t known = 0;
  for (const auto& tok : tokenize(utt.text)) {
    const auto* vec = table.find(tok);
    if (vec == nullptr) continue;
    for (std::size_t i = 0; i < vec->size(); ++i) out.values[i] += (*vec)[i];
    ++known;
  }
  if (known > 0) {
    for (double& v : out.values) v /= static_cast<double>(known);
  }
  return out;
}

FeatureVector concat_encode(const FeatureVector& char_part, const FeatureVector& word_part) {
  std::vector<double> v = char_part.values;
  v.insert(v.end(), word_part.values.begin(), word_part.values.end());
  return FeatureVector(std::move(v));
}

// ---------------------------------------------------------------------------

CharVocab::CharVocab() { lookup_.fill(kUnk); }

CharVocab CharVocab::from_chars(std::string_view chars) {
  CharVocab v;
  for (char c : chars) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 32 || u > 126) throw UsageError("character vocabulary holds printable ASCII only");
    if (v.lookup_[u] != kUnk) continue;
    v.chars_.push_back(c);
    v.lookup_[u] = v.chars_.size();  // index 0 is UNK
  }
  return v;
}

CharVocab CharVocab::build(std::span<const std::string> texts) {
  std::array<bool, 256> seen{};
  for (const auto& t : texts)
    for (char c : t) seen[static_cast<unsigned char>(c)] = true;
  std::string chars;
  for (int c = 32; c <= 126; ++c)
    if (seen[static_cast<std::size_t>(c)]) chars.push_back(static_cast<char>(c));
  return from_chars(chars);
}

std::size_t CharVocab::index(char c) const { return lookup_[static_cast<unsigned char>(c)]; }

MLSTMParams::MLSTMParams(std::size_t input_dim, std::size_t hidden_dim)
    : w_mx("mlstm.w_mx", hidden_dim, input_dim),
      w_mh("mlstm.w_mh", hidden_dim, hidden_dim),
      w_ix("mlstm.w_ix", hidden_dim, input_dim),
      w_fx("mlstm.w_fx", hidden_dim, input_dim),
      w_ox("mlstm.w_ox", hidden_dim, input_dim),
      w_cx("mlstm.w_cx", hidden_dim, input_dim),
      w_im("mlstm.w_im", hidden_dim, hidden_dim),
      w_fm("mlstm.w_fm", hidden_dim, hidden_dim),
      w_om("mlstm.w_om", hidden_dim, hidden_dim),
      w_cm("mlstm.w_cm", hidden_dim, hidden_dim),
      b_i("mlstm.b_i", hidden_dim, 1),
      b_f("mlstm.b_f", hidden_dim, 1),
      b_o("mlstm.b_o", hidden_dim, 1),
      b_c("mlstm.b_c", hidden_dim, 1) {
  if (input_dim == 0 || hidden_dim == 0) throw DimensionError("mLSTM dimensions must be positive");
}

void MLSTMParams::init(Rng& rng) { init_parameters(parameters(), rng); }

std::vector<Parameter*> MLSTMParams::parameters() {
  return {&w_mx, &w_mh, &w_ix, &w_fx, &w_ox, &w_cx, &w_im,
          &w_fm, &w_om, &w_cm, &b_i,  &b_f,  &b_o,  &b_c};
}

std::vector<const Parameter*> MLSTMParams::parameters() const {
  return {&w_mx, &w_mh, &w_ix, &w_fx, &w_ox, &w_cx, &w_im,
          &w_fm, &w_om, &w_cm, &b_i,  &b_f,  &b_o,  &b_c};
}

MLSTMVars::MLSTMVars(Tape& tape, MLSTMParams& p)
    : w_mx(tape.parameter(p.w_mx)),
      w_mh(tape.parameter(p.w_mh)),
      w_ix(tape.parameter(p.w_ix)),
      w_fx(tape.parameter(p.w_fx)),
      w_ox(tape.parameter(p.w_ox)),
      w_cx(tape.parameter(p.w_cx)),
      w_im(tape.parameter(p.w_im)),
      w_fm(tape.parameter(p.w_fm)),
      w_om(tape.parameter(p.w_om)),
      w_cm(tape.parameter(p.w_cm)),
      b_i(tape.parameter(p.b_i)),
      b_f(tape.parameter(p.b_f)),
      b_o(tape.parameter(p.b_o)),
      b_c(tape.parameter(p.b_c)) {}

MLSTMVars::MLSTMVars(Tape& tape, const MLSTMParams& p)
    : w_mx(tape.constant(p.w_mx.value)),
      w_mh(tape.constant(p.w_mh.value)),
      w_ix(tape.constant(p.w_ix.value)),
      w_fx(tape.constant(p.w_fx.value)),
      w_ox(tape.constant(p.w_ox.value)),
      w_cx(tape.constant(p.w_cx.value)),
      w_im(tape.constant(p.w_im.value)),
      w_fm(tape.constant(p.w_fm.value)),
      w_om(tape.constant(p.w_om.value)),
      w_cm(tape.constant(p.w_cm.value)),
      b_i(tape.constant(p.b_i.value)),
      b_f(tape.constant(p.b_f.value)),
      b_o(tape.constant(p.b_o.value)),
      b_c(tape.constant(p.b_c.value)) {}

MLSTMStateVars mlstm_step(Tape& tape, Var x, Var h_prev, Var c_prev, const MLSTMVars& p) {
  const Var m = tape.hadamard(tape.matmul(p.w_mx, x), tape.matmul(p.w_mh, h_prev));
  auto affine = [&](Var wx, Var wm, Var b) {
    return tape.add_bias(tape.add(tape.matmul(wx, x), tape.matmul(wm, m)), b);
  };
  const Var i = tape.sigmoid(affine(p.w_ix, p.w_im, p.b_i));
  const Var f = tape.sigmoid(affine(p.w_fx, p.w_fm, p.b_f));
  const Var o = tape.sigmoid(affine(p.w_ox, p.w_om, p.b_o));
  const Var g = tape.tanh(affine(p.w_cx, p.w_cm, p.b_c));
  const Var c = tape.add(tape.hadamard(f, c_prev), tape.hadamard(i, g));
  const Var h = tape.hadamard(o, tape.tanh(c));
  return {h, c};
}

MLSTMState mlstm_step(const Tensor2D& x_onehot, const MLSTMState& prev, const MLSTMParams& p) {
  if (x_onehot.rows() != p.input_dim() || prev.h.rows() != p.hidden_dim() ||
      prev.c.rows() != p.hidden_dim()) {
    throw DimensionError("mlstm_step: input " + x_onehot.shape_string() + ", h " +
                         prev.h.shape_string() + ", c " + prev.c.shape_string() +
                         " do not fit params (in " + std::to_string(p.input_dim()) +
                         ", hidden " + std::to_string(p.hidden_dim()) + ")");
  }
  Tape tape;
  const MLSTMVars vars(tape, p);
  const auto next = mlstm_step(tape, tape.constant(x_onehot), tape.constant(prev.h),
                               tape.constant(prev.c), vars);
  return {tape.value(next.h), tape.value(next.c)};
}

Tensor2D one_hot(const CharVocab& vocab, char c) {
  Tensor2D x(vocab.size(), 1);
  x(vocab.index(c), 0) = 1.0;
  return x;
}

FeatureVector char_encode(const Utterance& utt, const MLSTMParams& p, const CharVocab& vocab,
                          CharPooling pooling) {
  if (p.input_dim() != vocab.size()) {
    throw DimensionError("mLSTM input dim " + std::to_string(p.input_dim()) +
                         " does not match character vocabulary size " +
                         std::to_string(vocab.size()));
  }
  const std::size_t hidden = p.hidden_dim();
  FeatureVector out(hidden);
  if (utt.text.empty()) return out;

  Tape tape;
  const MLSTMVars vars(tape, p);
  MLSTMStateVars state{tape.constant(Tensor2D(hidden, 1)), tape.constant(Tensor2D(hidden, 1))};
  for (char ch : utt.text) {
    state = mlstm_step(tape, tape.constant(one_hot(vocab, ch)), state.h, state.c, vars);
    if (pooling == CharPooling::kMean) {
      const Tensor2D& h = tape.value(state.h);
      for (std::size_t i = 0; i < hidden; ++i) out.values[i] += h[i];
    }
  }
  if (pooling == CharPooling::kMean) {
    for (double& v : out.values) v /= static_cast<double>(utt.text.size());
  } else {
    const Tensor2D& h = tape.value(state.h);
    std::copy(h.values().begin(), h.values().end(), out.values.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

void PrecomputedFeatures::set(const std::string& conversation_id, std::size_t index,
                              std::vector<double> values) {
  if (entries_.empty()) {
    dim_ = values.size();
  } else if (values.size() != dim_) {
    throw DimensionError("feature vector for " + conversation_id + "/" + std::to_string(index) +
                         " has " + std::to_string(values.size()) + " values, expected " +
                         std::to_string(dim_));
  }
  entries_[{conversation_id, index}] = std::move(values);
}

const std::vector<double>* PrecomputedFeatures::find(const std::string& conversation_id,
                                                     std::size_t index) const {
  auto it = entries_.find({conversation_id, index});
  return it == entries_.end() ? nullptr : &it->second;
}

PrecomputedFeatures load_precomputed_features(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  PrecomputedFeatures features;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw ParseError("expected three tab-separated fields", line_no);
    const std::string conv = line.substr(0, tab1);
    std::size_t index = 0;
    if (!parse_size(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1), index)) {
      throw ParseError("bad utterance index", line_no);
    }
    std::vector<double> values;
    std::string_view rest = std::string_view(line).substr(tab2 + 1);
    while (true) {
      const auto comma = rest.find(',');
      double v = 0.0;
      if (!parse_double(rest.substr(0, comma), v) || !std::isfinite(v)) {
        throw ParseError("bad feature value '" + std::string(rest.substr(0, comma)) + "'", line_no);
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    try {
      features.set(conv, index, std::move(values));
    } catch (const DimensionError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return features;
}

void save_precomputed_features(const PrecomputedFeatures& features,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& [key, values] : features.entries()) {
    out << key.first << '\t' << key.second << '\t';
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out << ',';
      out << format_double(values[i]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kWord: return "word";
    case EncoderKind::kChar: return "char";
    case EncoderKind::kConcat: return "concat";
    case EncoderKind::kPrecomputed: return "precomputed";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "word") return EncoderKind::kWord;
  if (name == "char") return EncoderKind::kChar;
  if (name == "concat") return EncoderKind::kConcat;
  if (name == "precomputed") return EncoderKind::kPrecomputed;
  throw UsageError("unknown encoder '" + std::string(name) +
                   "' (expected word, char, concat or precomputed)");
}

WordMeanEncoder::WordMeanEncoder(std::shared_ptr<const EmbeddingTable> table)
    : table_(std::move(table)) {}

FeatureVector WordMeanEncoder::encode(const Utterance& utt) const {
  return word_mean_encode(utt, *table_);
}

CharEncoder::CharEncoder(std::shared_ptr<const CharLanguageModel> lm, CharPooling pooling)
    : lm_(std::move(lm)), pooling_(pooling) {}

std::size_t CharEncoder::dim() const { return lm_->hidden_dim(); }

FeatureVector CharEncoder::encode(const Utterance& utt) const { return lm_->encode(utt, pooling_); }

ConcatEncoder::ConcatEncoder(std::shared_ptr<const UtteranceEncoder> char_part,
                             std::shared_ptr<const UtteranceEncoder> word_part)
    : char_(std::move(char_part)), word_(std::move(word_part)) {}

FeatureVector ConcatEncoder::encode(const Utterance& utt) const {
  return concat_encode(char_->encode(utt), word_->encode(utt));
}

PrecomputedEncoder::PrecomputedEncoder(std::shared_ptr<const PrecomputedFeatures> features)
    : features_(std::move(features)) {}

FeatureVector PrecomputedEncoder::encode(const Utterance& utt) const {
  const auto* v = features_->find(utt.conversation_id, utt.index);
  if (v == nullptr) {
    throw UsageError("no precomputed features for utterance " + utt.conversation_id + "/" +
                     std::to_string(utt.index));
  }
  return FeatureVector(*v);
}

}  // namespace ctxda
