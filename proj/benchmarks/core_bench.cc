#include <benchmark/benchmark.h>

#include "emokit/augment.h"
#include "emokit/metrics.h"
#include "emokit/trainer.h"
#include "metrics_oracle.h"
#include "toy_data.h"

namespace {

using namespace emokit;

void BM_Score(benchmark::State& state) {
  const LabelSpace space = builtin_space("goemotions");
  std::vector<LabelSet> gold, pred;
  testing::random_pairs(1, static_cast<std::size_t>(state.range(0)), 28, gold, pred);
  for (auto _ : state) benchmark::DoNotOptimize(score(gold, pred, space));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Score)->Arg(1000)->Arg(10000);

void BM_DdaVariant(benchmark::State& state) {
  const Lexicon lex = Lexicon::builtin();
  const AugmentationPolicy policy;
  const std::string sentence = "I am so happy that you came to the party, it was a great night";
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(dda_variant(sentence, policy, lex, rng));
}
BENCHMARK(BM_DdaVariant);

void BM_Expand(benchmark::State& state) {
  const Lexicon lex = Lexicon::builtin();
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 2000, 3);
  AugmentationPolicy policy;
  policy.workers = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(expand(ds, policy, {&lex, nullptr, nullptr}));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_Expand)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Distribution(benchmark::State& state) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 50000, 5);
  for (auto _ : state) benchmark::DoNotOptimize(distribution(ds));
}
BENCHMARK(BM_Distribution)->Unit(benchmark::kMillisecond);

void BM_FitEpoch(benchmark::State& state) {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 1000, 1);
  const Dataset dev(space, Split::kDev);
  RunConfig config;
  config.learning_rate = 0.05;
  config.epochs = 1;
  const TinyEncoder encoder{TinyEncoderOptions{}};
  for (auto _ : state) benchmark::DoNotOptimize(fit(train, dev, config, encoder).best_epoch);
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_FitEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
