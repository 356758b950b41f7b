#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ctxda/char_lm.hpp"
#include "ctxda/corpus.hpp"
#include "ctxda/encoders.hpp"
#include "ctxda/model.hpp"
#include "ctxda/optim.hpp"

namespace ctxda::cli {

/// Everything a command needs, read from one JSON document. See
/// configs/README.md for the schema. Relative paths are taken as given
/// (relative to the working directory).
struct RunConfig {
  // corpus
  std::string corpus_format = "jsonl";  // jsonl | swda
  std::filesystem::path train_corpus;
  std::filesystem::path test_corpus;
  std::filesystem::path swda_dir;
  std::filesystem::path tag_map;
  std::filesystem::path test_ids;
  SwdaCsvOptions swda;

  // encoder
  EncoderKind encoder = EncoderKind::kWord;
  std::filesystem::path embeddings;
  std::filesystem::path features;
  CharPooling pooling = CharPooling::kMean;
  CharLMConfig char_lm;

  // models and training
  ModelKind model = ModelKind::kUttAttBiRNN;
  UttAttConfig uttatt;
  BaselineConfig baseline;
  TrainConfig train;

  // synthetic corpus
  SyntheticSpec synthetic;
  std::size_t synthetic_test_conversations = 20;
  std::size_t synthetic_embedding_dim = 16;

  // analysis
  std::size_t short_max_tokens = 2;
  bool svg = true;

  std::filesystem::path output_dir = "out";
  int runs = 1;
  std::uint64_t seed = 1;

  /// Unknown keys are rejected. Throws UsageError / ParseError.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  /// Propagates `seed` to the training, synthetic and char-LM seeds.
  void set_seed(std::uint64_t s);
  void validate() const;
};

}  // namespace ctxda::cli
