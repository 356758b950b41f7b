#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>

#include "ctxda/char_lm.hpp"
#include "ctxda/corpus.hpp"
#include "ctxda/encoders.hpp"
#include "ctxda/model.hpp"

namespace ctxda {

/// How utterances were turned into feature vectors for a model.
struct EncoderSpec {
  EncoderKind kind = EncoderKind::kWord;
  std::filesystem::path embeddings;  // word, concat
  std::filesystem::path features;    // precomputed
  CharPooling pooling = CharPooling::kMean;
  std::shared_ptr<const CharLanguageModel> char_lm;  // char, concat (stored inline)
  std::size_t dim = 0;
};

/// Loads the files named in `spec`. Throws ParseError for unreadable
/// files, DimensionError when the result does not have `spec.dim` values
/// (a zero `dim` is not checked).
std::shared_ptr<const UtteranceEncoder> make_encoder(const EncoderSpec& spec);

struct Checkpoint {
  std::unique_ptr<Classifier> model;
  TagVocabulary tags;
  EncoderSpec encoder;
  std::size_t n_context = 4;
  std::uint64_t seed = 0;
};

/// JSON document; see docs/checkpoint_format.md. Output is a function of the
/// checkpoint contents only.
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointError with a diagnostic on any malformed or inconsistent
/// content.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctxda
