// Serial reference kernels against the OpenMP versions on a desk-scale panel.

#include <benchmark/benchmark.h>

#include "gfe/dgp.hpp"
#include "gfe/kernels.hpp"
#include "gfe/ols.hpp"

namespace {

struct Fixture {
  gfe::Simulated sim;
  gfe::kernels::DesignLayout layout;
  gfe::ModelParams params;

  Fixture() {
    sim = gfe::generate(gfe::make_spec(2000, 12, 4, 7, 20, 1.0, 1.0, gfe::Rotation::rolling(5), 7));
    const gfe::DesignSpec design{4, true, 0};
    layout = gfe::make_layout(sim.data, gfe::cell_counts(sim.data, sim.truth.gamma), 4, design);
    params = sim.truth.params;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

template <auto Fn>
void normal_equations(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f.sim.data, f.layout, f.sim.truth.gamma.group));
}

template <auto Fn>
void sse(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f.sim.data, f.params, f.sim.truth.gamma.group));
}

template <auto Fn>
void losses(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(f.sim.data, f.params));
}

}  // namespace

BENCHMARK(normal_equations<gfe::kernels::serial::accumulate_normal_equations>)->Name("normal_equations/serial");
BENCHMARK(normal_equations<gfe::kernels::omp::accumulate_normal_equations>)->Name("normal_equations/omp");
BENCHMARK(sse<gfe::kernels::serial::masked_sse>)->Name("masked_sse/serial");
BENCHMARK(sse<gfe::kernels::omp::masked_sse>)->Name("masked_sse/omp");
BENCHMARK(losses<gfe::kernels::serial::assignment_losses>)->Name("assignment_losses/serial");
BENCHMARK(losses<gfe::kernels::omp::assignment_losses>)->Name("assignment_losses/omp");

BENCHMARK_MAIN();
