// Serial against OpenMP evaluation of the radiation diffusion kernels.
// Range argument 0 is the cell count, argument 1 selects the execution mode.
#include <benchmark/benchmark.h>

#include "padj/radiff.hpp"
#include "padj/timeint.hpp"

namespace {

using namespace padj;

radiff::RadDiffConfig config(const benchmark::State& state) {
  radiff::RadDiffConfig cfg;
  cfg.n = static_cast<std::size_t>(state.range(0));
  cfg.exec = state.range(1) ? radiff::Exec::parallel : radiff::Exec::serial;
  return cfg;
}

void label(benchmark::State& state) { state.SetLabel(state.range(1) ? "parallel" : "serial"); }

void BM_Assemble(benchmark::State& state) {
  const auto cfg = config(state);
  const auto prob = radiff::marshak_problem(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(radiff::assemble(cfg, prob.initial.y()));
  label(state);
}

void BM_FieldValue(benchmark::State& state) {
  const auto prob = radiff::marshak_problem(config(state));
  const BlockVec& u = prob.initial;
  for (auto _ : state) benchmark::DoNotOptimize(prob.field->value({0.0, u, 0.0, u}));
  label(state);
}

void BM_Jacobian(benchmark::State& state) {
  const auto prob = radiff::marshak_problem(config(state));
  const BlockVec& u = prob.initial;
  for (auto _ : state) {
    benchmark::DoNotOptimize(prob.field->jacobian(Slot::first, {0.0, u, 0.0, u}));
    benchmark::DoNotOptimize(prob.field->jacobian(Slot::second, {0.0, u, 0.0, u}));
  }
  label(state);
}

void BM_ForwardSteps(benchmark::State& state) {
  const auto prob = radiff::marshak_problem(config(state));
  const StepConfig step{5e-13};
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_forward(*prob.field, prob.initial, 0.0, 50 * step.dt, step));
  }
  label(state);
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {100, 1000, 10000}) {
    for (long exec : {0, 1}) b->Args({n, exec});
  }
}

}  // namespace

BENCHMARK(BM_Assemble)->Apply(sizes);
BENCHMARK(BM_FieldValue)->Apply(sizes);
BENCHMARK(BM_Jacobian)->Apply(sizes);
BENCHMARK(BM_ForwardSteps)->Args({100, 0})->Args({100, 1})->Args({200, 0})->Args({200, 1});

BENCHMARK_MAIN();
