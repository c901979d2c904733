#include <benchmark/benchmark.h>

#include "pcv2/coder.hpp"
#include "pcv2/harness.hpp"
#include "pcv2/probmodel.hpp"

using namespace pcv2;

namespace {

TokenGrid bench_grid(int n, u32 V) {
  return gen_markov_grid(MarkovSource{V, 0.9, {1.0, 1.0}, 5}, n, n, 0);
}

void BM_EncodeUniform(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TokenGrid grid = bench_grid(n, 256);
  MaskSchedule sched = checkerboard_schedule(n, n);
  UniformModel model(256);
  for (auto _ : state) {
    Bitstream bs = encode_grid(grid, sched, model);
    benchmark::DoNotOptimize(bs.payload.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.positions()));
}
BENCHMARK(BM_EncodeUniform)->Arg(16)->Arg(32)->Arg(64);

void BM_RoundTripCounting(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TokenGrid grid = bench_grid(n, 64);
  MaskSchedule sched = qlds_schedule(n, n, 2.2, 5);
  CountingModel model(64);
  for (auto _ : state) {
    Bitstream bs = encode_grid(grid, sched, model);
    TokenGrid back = decode_grid(bs, model);
    benchmark::DoNotOptimize(back.indices.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(grid.positions()));
}
BENCHMARK(BM_RoundTripCounting)->Arg(8)->Arg(16);

void BM_QuantizeProbs(benchmark::State& state) {
  const u32 v = static_cast<u32>(state.range(0));
  std::vector<double> probs(v, 1.0 / v);
  probs[0] *= 1.5;
  probs[v - 1] *= 0.5;
  double sum = 0.0;
  for (double p : probs) sum += p;
  for (auto& p : probs) p /= sum;
  for (auto _ : state) {
    auto freq = quantize_probs(probs);
    benchmark::DoNotOptimize(freq.data());
  }
}
BENCHMARK(BM_QuantizeProbs)->Arg(64)->Arg(256)->Arg(1024);

}  // namespace
