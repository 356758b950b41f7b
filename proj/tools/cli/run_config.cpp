#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ctxda/errors.hpp"
#include "json.hpp"

namespace ctxda::cli {

using json = nlohmann::json;

namespace {

// Reads keys of one JSON object section, rejecting anything not consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw UsageError("config: \"" + name_ + "\" must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  void path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <typename F>
  void section(const char* key, F&& fn) {
    seen_.insert(key);
    if (j_.contains(key)) {
      Section sub(j_.at(key), name_ + "." + key);
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw UsageError("config: unknown key " + name_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "config");

  std::uint64_t seed = c.seed;
  root.get("seed", seed);
  c.set_seed(seed);
  root.path("output_dir", c.output_dir);
  root.get("runs", c.runs);

  root.section("corpus", [&](Section& s) {
    s.get("format", c.corpus_format);
    s.path("train", c.train_corpus);
    s.path("test", c.test_corpus);
    s.path("swda_dir", c.swda_dir);
    s.path("tag_map", c.tag_map);
    s.path("test_ids", c.test_ids);
    s.section("swda_columns", [&](Section& col) {
      col.get("text", c.swda.text_column);
      col.get("act_tag", c.swda.tag_column);
      col.get("conversation", c.swda.conversation_column);
      col.get("speaker", c.swda.speaker_column);
    });
    s.get("merge_continuations", c.swda.merge_continuations);
  });

  root.section("encoder", [&](Section& s) {
    std::string kind = to_string(c.encoder);
    s.get("kind", kind);
    c.encoder = parse_encoder_kind(kind);
    s.path("embeddings", c.embeddings);
    s.path("features", c.features);
    std::string pooling = c.pooling == CharPooling::kMean ? "mean" : "last";
    s.get("pooling", pooling);
    if (pooling == "mean") {
      c.pooling = CharPooling::kMean;
    } else if (pooling == "last") {
      c.pooling = CharPooling::kLast;
    } else {
      throw UsageError("config: encoder.pooling must be mean or last");
    }
    s.section("char_lm", [&](Section& lm) {
      lm.get("hidden_dim", c.char_lm.hidden_dim);
      lm.get("epochs", c.char_lm.epochs);
      lm.get("learning_rate", c.char_lm.learning_rate);
      lm.get("max_chars", c.char_lm.max_chars);
      lm.get("batch_size", c.char_lm.batch_size);
    });
  });

  root.section("model", [&](Section& s) {
    std::string kind = to_string(c.model);
    s.get("kind", kind);
    c.model = parse_model_kind(kind);
    s.get("hidden_dim", c.uttatt.hidden_dim);
    s.get("attention_dim", c.uttatt.attention_dim);
    s.get("mask_pads", c.uttatt.mask_pads);
    std::string head = c.uttatt.head == OutputHead::kAttention ? "attention" : "direct";
    s.get("head", head);
    if (head == "attention") {
      c.uttatt.head = OutputHead::kAttention;
    } else if (head == "direct") {
      c.uttatt.head = OutputHead::kDirect;
    } else {
      throw UsageError("config: model.head must be attention or direct");
    }
    s.get("baseline_hidden1", c.baseline.hidden1);
    s.get("baseline_hidden2", c.baseline.hidden2);
    s.get("baseline_dropout", c.baseline.dropout);
  });

  root.section("train", [&](Section& s) {
    s.get("n_context", c.train.n_context);
    s.get("batch_size", c.train.batch_size);
    s.get("max_epochs", c.train.max_epochs);
    s.get("dropout", c.train.dropout);
    s.get("learning_rate", c.train.learning_rate);
    s.get("lr_decay", c.train.lr_decay);
    s.get("validation_fraction", c.train.validation_fraction);
    s.get("patience", c.train.patience);
    s.get("split_by_conversation", c.train.split_by_conversation);
  });

  root.section("synthetic", [&](Section& s) {
    s.get("num_classes", c.synthetic.num_classes);
    s.get("words_per_class", c.synthetic.words_per_class);
    s.get("filler_words", c.synthetic.filler_words);
    s.get("short_words", c.synthetic.short_words);
    s.get("min_tokens", c.synthetic.min_tokens);
    s.get("max_tokens", c.synthetic.max_tokens);
    s.get("noise", c.synthetic.noise);
    std::string rule = to_string(c.synthetic.rule);
    s.get("rule", rule);
    c.synthetic.rule = parse_label_rule(rule);
    s.get("short_fraction", c.synthetic.short_fraction);
    s.get("num_conversations", c.synthetic.num_conversations);
    s.get("conversation_length", c.synthetic.conversation_length);
    s.get("test_conversations", c.synthetic_test_conversations);
    s.get("embedding_dim", c.synthetic_embedding_dim);
  });

  root.section("analysis", [&](Section& s) {
    s.get("short_max_tokens", c.short_max_tokens);
    s.get("svg", c.svg);
  });

  root.finish();
  c.uttatt.dropout = c.train.dropout;
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_json_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  synthetic.seed = s;
  char_lm.seed = s;
}

void RunConfig::validate() const {
  if (corpus_format != "jsonl" && corpus_format != "swda") {
    throw UsageError("config: corpus.format must be jsonl or swda");
  }
  if (runs < 1) throw UsageError("runs must be at least 1");
  train.validate();
}

}  // namespace ctxda::cli
