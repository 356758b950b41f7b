#include <benchmark/benchmark.h>

#include "ctxda/encoders.hpp"
#include "ctxda/model.hpp"
#include "ctxda/tape.hpp"
#include "test_support.hpp"

using namespace ctxda;

namespace {

void BM_Matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(1);
  Tensor2D a(n, n), b(n, n);
  glorot_uniform(a, rng);
  glorot_uniform(b, rng);
  for (auto _ : st) benchmark::DoNotOptimize(matmul(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_BiRNNForward(benchmark::State& st) {
  const auto hidden = static_cast<std::size_t>(st.range(0));
  const auto windows = testing::random_windows(64, 5, 100, 42, 3);
  UttAttBiRNN m(100, 42, UttAttConfig{hidden});
  Rng rng(2);
  m.init(rng);
  for (auto _ : st) benchmark::DoNotOptimize(m.predict(windows));
  st.SetItemsProcessed(st.iterations() * 64);
}
BENCHMARK(BM_BiRNNForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BiRNNTrainStep(benchmark::State& st) {
  const auto hidden = static_cast<std::size_t>(st.range(0));
  const auto windows = testing::random_windows(64, 5, 100, 42, 3);
  std::vector<const ContextWindow*> batch;
  for (const auto& w : windows) batch.push_back(&w);
  UttAttBiRNN m(100, 42, UttAttConfig{hidden});
  Rng rng(2);
  m.init(rng);
  for (auto _ : st) {
    Tape tape;
    const Var loss = m.batch_loss(tape, batch, rng, true);
    tape.backward(loss);
    for (Parameter* p : m.parameters()) p->zero_grad();
  }
  st.SetItemsProcessed(st.iterations() * 64);
}
BENCHMARK(BM_BiRNNTrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CharEncode(benchmark::State& st) {
  const auto hidden = static_cast<std::size_t>(st.range(0));
  const auto vocab = CharVocab::from_chars("abcdefghijklmnopqrstuvwxyz .,?'");
  MLSTMParams p(vocab.size(), hidden);
  Rng rng(4);
  p.init(rng);
  Utterance u;
  u.text = "well i think that's about all i have to say about that.";
  for (auto _ : st) benchmark::DoNotOptimize(char_encode(u, p, vocab));
  st.SetBytesProcessed(st.iterations() * static_cast<std::int64_t>(u.text.size()));
}
BENCHMARK(BM_CharEncode)->Arg(64)->Arg(256);

}  // namespace
BENCHMARK_MAIN();
