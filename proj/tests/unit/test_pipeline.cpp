#include "ctxda/analysis.hpp"
#include "ctxda/corpus.hpp"
#include "ctxda/encoders.hpp"
#include "ctxda/optim.hpp"
#include "doctest.h"

using namespace ctxda;

namespace {

struct Trained {
  std::vector<EvalRecord> records;
  double wc_accuracy = 0;
};

Trained train_and_eval(LabelRule rule, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.rule = rule;
  spec.num_conversations = 150;
  spec.seed = seed;
  const auto train_convs = generate_synthetic(spec);
  SyntheticSpec test_spec = spec;
  test_spec.num_conversations = 15;
  test_spec.seed = seed + 99;
  const auto test_convs = generate_synthetic(test_spec);

  const auto tags = TagVocabulary::build(train_convs);
  const WordMeanEncoder enc(std::make_shared<EmbeddingTable>(synthetic_embeddings(spec, 16, seed + 7)));
  const auto train_w = build_windows(train_convs, 4, enc, tags);
  const auto test_w = build_windows(test_convs, 4, enc, tags);

  UttAttBiRNN wc(16, tags.size(), UttAttConfig{32, 0, 0.0});
  BaselineMLP nc(16, tags.size(), BaselineConfig{32, 16, 0.0});
  Rng rng(seed);
  wc.init(rng);
  nc.init(rng);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 80;
  cfg.learning_rate = 0.01;
  cfg.patience = 10;
  cfg.seed = seed;
  train(wc, train_w, cfg);
  train(nc, train_w, cfg);

  Trained t;
  t.records = make_eval_records(test_w, nc.predict(test_w), wc.predict(test_w), tags, test_convs);
  t.wc_accuracy = accuracy(t.records).wc;
  return t;
}

}  // namespace

TEST_CASE("short utterances lean harder on the previous one") {
  // Per run the split is noisy; the claim is about the mean over runs.
  double slice_a1 = 0, full_a1 = 0;
  const int runs = 5;
  for (int i = 0; i < runs; ++i) {
    const auto t = train_and_eval(LabelRule::kShortAmbiguous, 31 + static_cast<std::uint64_t>(i));
    CHECK(t.wc_accuracy > 75.0);
    const auto s = short_utterance_slice(t.records, 2);
    REQUIRE(s.slice.has_value());
    CHECK(s.count > 20);
    slice_a1 += (*s.slice)[1] / runs;
    full_a1 += s.full[1] / runs;
  }
  MESSAGE("short slice a1 ", slice_a1, ", all records a1 ", full_a1);
  CHECK(slice_a1 > full_a1);
}
