#include <benchmark/benchmark.h>

#include "lambda_lqg/finite_horizon.hpp"
#include "lambda_lqg/plant_models.hpp"
#include "lambda_lqg/riccati.hpp"
#include "lambda_lqg/simulator.hpp"
#include "lambda_lqg/synthesis.hpp"

using namespace lambda_lqg;

namespace {

const std::vector<SubsystemModel>& subsystems() {
  static const std::vector<SubsystemModel> s{make_pzt_model({}), make_stepper_model({})};
  return s;
}

const PartitionedPlant& plant() {
  static const PartitionedPlant p =
      discretize_plant(assemble_global_plant(subsystems(), build_cost_matrices(subsystems(), 1e-8)), 1.0 / 6000);
  return p;
}

void BM_Dare(benchmark::State& state) {
  const auto& r = plant().realization;
  const AreProblem p{r.A, r.B2, r.C1, r.D12};
  for (auto _ : state) benchmark::DoNotOptimize(solve_dare(p));
}
BENCHMARK(BM_Dare)->Unit(benchmark::kMicrosecond);

void BM_Discretize(benchmark::State& state) {
  const PartitionedPlant c = assemble_global_plant(subsystems(), build_cost_matrices(subsystems(), 1e-8));
  for (auto _ : state) benchmark::DoNotOptimize(discretize_plant(c, 1.0 / 6000));
}
BENCHMARK(BM_Discretize)->Unit(benchmark::kMicrosecond);

void BM_CentralizedDelayed(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(centralized_delayed_lqg(plant().realization, d));
}
BENCHMARK(BM_CentralizedDelayed)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Decentralized(benchmark::State& state) {
  const int d2 = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(decentralized_delayed_lqg(plant(), 2, d2));
}
BENCHMARK(BM_Decentralized)->Arg(3)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_StructuredFir(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(structured_fir_youla(plant(), 2, 3, n));
}
BENCHMARK(BM_StructuredFir)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_ExactH2(benchmark::State& state) {
  const LinearController k = realize(decentralized_delayed_lqg(plant(), 2, 3));
  for (auto _ : state) benchmark::DoNotOptimize(exact_h2_cost(plant().realization, k));
}
BENCHMARK(BM_ExactH2)->Unit(benchmark::kMillisecond);

void BM_AgentNetworkStep(benchmark::State& state) {
  auto k = instantiate(decentralized_delayed_lqg(plant(), 2, 3));
  const Vector y = Vector::Ones(2);
  for (auto _ : state) benchmark::DoNotOptimize(k->step(y, true));
}
BENCHMARK(BM_AgentNetworkStep);

void BM_Simulate(benchmark::State& state) {
  const auto k = instantiate(decentralized_delayed_lqg(plant(), 2, 3));
  SimulationSetup s;
  s.steps = 20000;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(plant(), *k, s));
  state.SetItemsProcessed(state.iterations() * s.steps);
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const auto k = instantiate(decentralized_delayed_lqg(plant(), 2, 3));
  MonteCarloSettings s;
  s.n_runs = 8;
  s.steps = 20000;
  s.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_cost(plant(), *k, s));
}
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Oracle(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const Matrix s0 = Matrix::Identity(5, 5);
  for (auto _ : state) benchmark::DoNotOptimize(finite_horizon_oracle(plant(), 1, 2, t, s0));
}
BENCHMARK(BM_Oracle)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
