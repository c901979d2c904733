#include <benchmark/benchmark.h>

#include "pcv2/harness.hpp"
#include "pcv2/probmodel.hpp"

using namespace pcv2;

namespace {

void BM_MimForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  MimModel m = MimModel::create(n, n, 64, 3, 64, 2, 4);
  TokenGrid grid = gen_markov_grid(MarkovSource{64, 0.9, {1.0, 1.0}, 1}, n, n, 0);
  std::vector<u8> revealed(grid.positions(), 0);
  for (std::size_t i = 0; i < revealed.size(); i += 2) revealed[i] = 1;
  for (auto _ : state) {
    CategoricalField f = mim_forward(m, grid, revealed);
    benchmark::DoNotOptimize(f.probs.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.positions()));
}
BENCHMARK(BM_MimForward)->Arg(8)->Arg(16);

void BM_MimTrainStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  MimModel m = MimModel::create(n, n, 64, 3, 64, 2, 4);
  auto corpus = gen_markov_corpus(MarkovSource{64, 0.9, {1.0, 1.0}, 2}, n, n, 8);
  TrainConfig cfg;
  cfg.batch = 8;
  MimTrainer trainer(m, cfg);
  for (auto _ : state) {
    double loss = trainer.step(corpus);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_MimTrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_CountingPredict(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  CountingModel model(64);
  TokenGrid grid = gen_markov_grid(MarkovSource{64, 0.9, {1.0, 1.0}, 3}, n, n, 0);
  std::vector<u8> revealed(grid.positions(), 1);
  revealed[grid.positions() / 2] = 0;
  RevealedView view(grid, revealed);
  std::vector<double> row(64);
  for (auto _ : state) {
    model.predict(static_cast<u32>(grid.positions() / 2), view, row);
    benchmark::DoNotOptimize(row.data());
  }
}
BENCHMARK(BM_CountingPredict)->Arg(16)->Arg(64);

}  // namespace
