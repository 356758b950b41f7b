#include "ctxda/checkpoint.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ctxda/errors.hpp"
#include "json.hpp"

namespace ctxda {

using json = nlohmann::json;

namespace {

constexpr const char* kFormat = "ctxda-checkpoint";
constexpr int kVersion = 1;

std::string pooling_name(CharPooling p) { return p == CharPooling::kMean ? "mean" : "last"; }

CharPooling parse_pooling(const std::string& s) {
  if (s == "mean") return CharPooling::kMean;
  if (s == "last") return CharPooling::kLast;
  throw CheckpointError("unknown char pooling '" + s + "'");
}

std::string head_name(OutputHead h) { return h == OutputHead::kAttention ? "attention" : "direct"; }

OutputHead parse_head(const std::string& s) {
  if (s == "attention") return OutputHead::kAttention;
  if (s == "direct") return OutputHead::kDirect;
  throw CheckpointError("unknown output head '" + s + "'");
}

json tensors_json(const std::vector<const Parameter*>& params) {
  json out = json::array();
  for (const Parameter* p : params) {
    out.push_back({{"name", p->name},
                   {"rows", p->value.rows()},
                   {"cols", p->value.cols()},
                   {"values", std::vector<double>(p->value.values().begin(),
                                                  p->value.values().end())}});
  }
  return out;
}

// Copies stored tensors into `params`, requiring an exact name and shape match.
void restore_tensors(const json& tensors, const std::vector<Parameter*>& params,
                     const std::string& what) {
  if (!tensors.is_array()) throw CheckpointError(what + ": \"tensors\" must be an array");
  std::map<std::string, const json*> by_name;
  for (const json& t : tensors) {
    const auto name = t.at("name").get<std::string>();
    if (!by_name.emplace(name, &t).second) {
      throw CheckpointError(what + ": duplicate tensor '" + name + "'");
    }
  }
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw CheckpointError(what + ": missing tensor '" + p->name + "'");
    const json& t = *it->second;
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw CheckpointError(what + ": tensor '" + p->name + "' is " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + p->value.shape_string());
    }
    auto values = t.at("values").get<std::vector<double>>();
    if (values.size() != rows * cols) {
      throw CheckpointError(what + ": tensor '" + p->name + "' has " +
                            std::to_string(values.size()) + " values");
    }
    p->value = Tensor2D(rows, cols, std::move(values));
    p->grad = Tensor2D(rows, cols);
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw CheckpointError(what + ": unexpected tensor '" + by_name.begin()->first + "'");
  }
}

json char_lm_json(const CharLanguageModel& lm) {
  return {{"chars", lm.vocab().chars()},
          {"hidden_dim", lm.hidden_dim()},
          {"tensors", tensors_json(lm.parameters())}};
}

std::shared_ptr<const CharLanguageModel> char_lm_from_json(const json& j) {
  auto lm = std::make_shared<CharLanguageModel>(
      CharVocab::from_chars(j.at("chars").get<std::string>()), j.at("hidden_dim").get<std::size_t>());
  restore_tensors(j.at("tensors"), lm->parameters(), "char_lm");
  return lm;
}

}  // namespace

std::shared_ptr<const UtteranceEncoder> make_encoder(const EncoderSpec& spec) {
  auto word = [&]() -> std::shared_ptr<const UtteranceEncoder> {
    if (spec.embeddings.empty()) throw UsageError("word encoder needs an embeddings file");
    return std::make_shared<WordMeanEncoder>(
        std::make_shared<const EmbeddingTable>(load_embeddings(spec.embeddings)));
  };
  auto chars = [&]() -> std::shared_ptr<const UtteranceEncoder> {
    if (!spec.char_lm) throw UsageError("char encoder needs a character language model");
    return std::make_shared<CharEncoder>(spec.char_lm, spec.pooling);
  };
  std::shared_ptr<const UtteranceEncoder> enc;
  switch (spec.kind) {
    case EncoderKind::kWord: enc = word(); break;
    case EncoderKind::kChar: enc = chars(); break;
    case EncoderKind::kConcat: enc = std::make_shared<ConcatEncoder>(chars(), word()); break;
    case EncoderKind::kPrecomputed:
      if (spec.features.empty()) throw UsageError("precomputed encoder needs a features file");
      enc = std::make_shared<PrecomputedEncoder>(std::make_shared<const PrecomputedFeatures>(
          load_precomputed_features(spec.features)));
      break;
  }
  if (spec.dim != 0 && enc->dim() != spec.dim) {
    throw DimensionError("encoder yields " + std::to_string(enc->dim()) + " values, expected " +
                         std::to_string(spec.dim));
  }
  return enc;
}

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  if (!ckpt.model) throw UsageError("checkpoint has no model");
  const Classifier& m = *ckpt.model;
  json config;
  if (const auto* b = dynamic_cast<const BaselineMLP*>(&m)) {
    config = {{"hidden1", b->config().hidden1},
              {"hidden2", b->config().hidden2},
              {"dropout", b->config().dropout}};
  } else if (const auto* u = dynamic_cast<const UttAttBiRNN*>(&m)) {
    config = {{"hidden_dim", u->config().hidden_dim},
              {"attention_dim", u->attention_params().w_h.value.rows()},
              {"dropout", u->config().dropout},
              {"mask_pads", u->config().mask_pads},
              {"head", head_name(u->config().head)}};
  } else {
    throw UsageError("unsupported classifier type");
  }

  json enc = {{"kind", to_string(ckpt.encoder.kind)},
              {"embeddings", ckpt.encoder.embeddings.generic_string()},
              {"features", ckpt.encoder.features.generic_string()},
              {"pooling", pooling_name(ckpt.encoder.pooling)},
              {"dim", ckpt.encoder.dim},
              {"char_lm", ckpt.encoder.char_lm ? char_lm_json(*ckpt.encoder.char_lm) : json()}};

  const json doc = {{"format", kFormat},
                    {"version", kVersion},
                    {"model", to_string(m.kind())},
                    {"input_dim", m.input_dim()},
                    {"num_classes", m.num_classes()},
                    {"n_context", ckpt.n_context},
                    {"seed", ckpt.seed},
                    {"tags", ckpt.tags.tags()},
                    {"encoder", std::move(enc)},
                    {"config", std::move(config)},
                    {"tensors", tensors_json(m.parameters())}};
  out << doc.dump(1) << '\n';
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ostringstream buf;
  save_checkpoint(ckpt, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << buf.str();
  if (!out) throw CheckpointError("error writing " + path.string());
}

Checkpoint load_checkpoint(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("malformed checkpoint JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kFormat) {
      throw CheckpointError("not a ctxda checkpoint (missing \"format\": \"" +
                            std::string(kFormat) + "\")");
    }
    if (doc.at("version").get<int>() != kVersion) {
      throw CheckpointError("unsupported checkpoint version " + doc.at("version").dump());
    }
    Checkpoint ckpt;
    ckpt.n_context = doc.at("n_context").get<std::size_t>();
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.tags = TagVocabulary(doc.at("tags").get<std::vector<std::string>>());

    const json& enc = doc.at("encoder");
    ckpt.encoder.kind = parse_encoder_kind(enc.at("kind").get<std::string>());
    ckpt.encoder.embeddings = enc.at("embeddings").get<std::string>();
    ckpt.encoder.features = enc.at("features").get<std::string>();
    ckpt.encoder.pooling = parse_pooling(enc.at("pooling").get<std::string>());
    ckpt.encoder.dim = enc.at("dim").get<std::size_t>();
    if (!enc.at("char_lm").is_null()) ckpt.encoder.char_lm = char_lm_from_json(enc.at("char_lm"));

    const auto input_dim = doc.at("input_dim").get<std::size_t>();
    const auto classes = doc.at("num_classes").get<std::size_t>();
    if (classes != ckpt.tags.size()) {
      throw CheckpointError("model has " + std::to_string(classes) + " classes but " +
                            std::to_string(ckpt.tags.size()) + " tags are listed");
    }
    const json& cfg = doc.at("config");
    switch (parse_model_kind(doc.at("model").get<std::string>())) {
      case ModelKind::kBaseline: {
        BaselineConfig c;
        c.hidden1 = cfg.at("hidden1").get<std::size_t>();
        c.hidden2 = cfg.at("hidden2").get<std::size_t>();
        c.dropout = cfg.at("dropout").get<double>();
        ckpt.model = std::make_unique<BaselineMLP>(input_dim, classes, c);
        break;
      }
      case ModelKind::kUttAttBiRNN: {
        UttAttConfig c;
        c.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
        c.attention_dim = cfg.at("attention_dim").get<std::size_t>();
        c.dropout = cfg.at("dropout").get<double>();
        c.mask_pads = cfg.at("mask_pads").get<bool>();
        c.head = parse_head(cfg.at("head").get<std::string>());
        ckpt.model = std::make_unique<UttAttBiRNN>(input_dim, classes, c);
        break;
      }
    }
    restore_tensors(doc.at("tensors"), ckpt.model->parameters(), "model");
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    return load_checkpoint(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace ctxda
