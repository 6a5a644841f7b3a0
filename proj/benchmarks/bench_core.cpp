#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "msfair/montecarlo.hpp"
#include "msfair/policy.hpp"

namespace {

using namespace msfair;

JointDistribution synthetic(std::size_t d, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < d; ++i) names.push_back("f" + std::to_string(i));
  FeatureSpace space(names);
  auto gen = make_stream(seed, 0);
  std::vector<double> mass(space.cell_count()), positive(space.cell_count());
  double total = 0.0;
  for (auto& m : mass) total += (m = 0.05 + uniform01(gen));
  for (std::size_t c = 0; c < mass.size(); ++c) {
    mass[c] /= total;
    positive[c] = uniform01(gen);
  }
  return JointDistribution(space, mass, positive);
}

// Two stages, the last feature sensitive and unobserved.
StagePlan two_stage_plan(std::size_t d) {
  return StagePlan{{(d - 1) / 2, d - 1}, d - 1, SensitivePlacement::unobserved()};
}

void BM_LpSolve(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto dist = synthetic(d, 1);
  const auto problem =
      assemble(dist, two_stage_plan(d), Budgets{{0.5, 0.3}}, {Criterion::DemographicParity, Scope::Local}).problem;
  for (auto _ : state) benchmark::DoNotOptimize(lp::solve(problem));
  state.counters["variables"] = static_cast<double>(problem.variables());
}
BENCHMARK(BM_LpSolve)->Arg(5)->Arg(7)->Arg(9)->Unit(benchmark::kMicrosecond);

void BM_Optimize(benchmark::State& state) {
  const auto dist = synthetic(5, 2);
  const auto scope = static_cast<Scope>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimize(dist, two_stage_plan(5), Budgets{{0.5, 0.3}},
                                      {Criterion::EqualOpportunity, scope}));
  }
}
BENCHMARK(BM_Optimize)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_SampleCohort(benchmark::State& state) {
  const auto dist = synthetic(6, 3);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_cohort(dist, n, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleCohort)->Arg(1000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_RunPolicy(benchmark::State& state) {
  const auto dist = synthetic(5, 4);
  const auto plan = two_stage_plan(5);
  const auto policy = optimize(dist, plan, Budgets{{0.5, 0.3}}, {Criterion::DemographicParity, Scope::Global}).policy;
  const auto cohort = sample_cohort(dist, static_cast<std::size_t>(state.range(0)), 9);
  for (auto _ : state) benchmark::DoNotOptimize(run_policy(cohort, policy, plan, 11));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunPolicy)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
