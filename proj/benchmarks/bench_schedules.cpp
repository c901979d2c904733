#include <benchmark/benchmark.h>

#include "pcv2/schedules.hpp"

using namespace pcv2;

namespace {

void BM_Checkerboard(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    MaskSchedule s = checkerboard_schedule(n, n);
    benchmark::DoNotOptimize(s.groups.data());
  }
}
BENCHMARK(BM_Checkerboard)->Arg(16)->Arg(64);

void BM_Qlds(benchmark::State& state) {
  // Dominated by the low-discrepancy nearest-cell assignment, O(N^2).
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    MaskSchedule s = qlds_schedule(n, n, 2.2, 12);
    benchmark::DoNotOptimize(s.groups.data());
  }
}
BENCHMARK(BM_Qlds)->Arg(8)->Arg(16)->Arg(32);

void BM_ImplicitVar(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<int> scales;
  for (int s = 2; s < n; s *= 2) scales.push_back(s);
  scales.push_back(n);
  for (auto _ : state) {
    MaskSchedule s = implicit_var_schedule(n, n, scales);
    benchmark::DoNotOptimize(s.groups.data());
  }
}
BENCHMARK(BM_ImplicitVar)->Arg(16)->Arg(64);

}  // namespace
