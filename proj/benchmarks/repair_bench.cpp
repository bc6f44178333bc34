// Repair layers against exact projections, plus the reference solver.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "e2elr/datagen.hpp"
#include "e2elr/ed_core.hpp"
#include "e2elr/projection.hpp"
#include "e2elr/repair.hpp"
#include "e2elr/rng.hpp"

namespace {

using namespace e2elr;

struct Context {
  RepairContext ctx;
  EDInstance inst;
  std::vector<double> p;          // in the box
  std::vector<double> balanced;   // in S_D
};

Context make_context(std::size_t n, bool reserve) {
  Rng rng(n);
  std::vector<double> pm(n), rm(n), c(n), p(n);
  for (std::size_t g = 0; g < n; ++g) {
    pm[g] = 10.0 * (1.0 - rng.uniform01());
    rm[g] = reserve ? rng.uniform(0.2, 1.0) * pm[g] : pm[g];
    c[g] = rng.uniform(10, 80);
    p[g] = rng.uniform01() * pm[g];
  }
  const double cap = std::accumulate(pm.begin(), pm.end(), 0.0);
  const double rcap = std::accumulate(rm.begin(), rm.end(), 0.0);
  const double D = 0.6 * cap;
  const double R = reserve ? 0.8 * std::min(cap - D, rcap) : 0.0;
  Context out{RepairContext(pm, rm, D, R), make_instance(pm, rm, c, D, R), p, {}};
  out.balanced = power_balance_repair(p, out.ctx).p;
  return out;
}

void BM_PowerBalanceRepair(benchmark::State& state) {
  const Context c = make_context(static_cast<std::size_t>(state.range(0)), false);
  std::vector<double> work(c.p.size());
  for (auto _ : state) {
    work = c.p;
    apply_power_balance_repair(work, c.ctx);
    benchmark::DoNotOptimize(work.data());
  }
}
BENCHMARK(BM_PowerBalanceRepair)->Arg(100)->Arg(1000)->Arg(10000);

void BM_ProjectHypersimplex(benchmark::State& state) {
  const Context c = make_context(static_cast<std::size_t>(state.range(0)), false);
  for (auto _ : state) benchmark::DoNotOptimize(project_hypersimplex(c.p, c.inst.p_max, c.inst.D));
}
BENCHMARK(BM_ProjectHypersimplex)->Arg(100)->Arg(1000)->Arg(10000);

void BM_BalanceAndReserveRepair(benchmark::State& state) {
  const Context c = make_context(static_cast<std::size_t>(state.range(0)), true);
  std::vector<double> work(c.p.size());
  for (auto _ : state) {
    work = c.p;
    apply_power_balance_repair(work, c.ctx);
    apply_reserve_repair(work, c.ctx);
    benchmark::DoNotOptimize(work.data());
  }
}
BENCHMARK(BM_BalanceAndReserveRepair)->Arg(100)->Arg(1000)->Arg(10000);

void BM_ProjectFeasibleEdr(benchmark::State& state) {
  const Context c = make_context(static_cast<std::size_t>(state.range(0)), true);
  for (auto _ : state) benchmark::DoNotOptimize(project_feasible_edr(c.p, c.inst));
}
BENCHMARK(BM_ProjectFeasibleEdr)->Arg(100)->Arg(1000);

void BM_ReserveRepairVjp(benchmark::State& state) {
  const Context c = make_context(static_cast<std::size_t>(state.range(0)), true);
  const ReserveResult r = reserve_repair(c.balanced, c.ctx);
  const std::vector<double> u(c.p.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(reserve_repair_vjp(r.handle, u));
}
BENCHMARK(BM_ReserveRepairVjp)->Arg(1000);

void BM_SolveReference(benchmark::State& state) {
  SyntheticCaseOptions opt;
  opt.num_buses = static_cast<int>(state.range(0));
  opt.num_generators = static_cast<int>(state.range(1));
  opt.seed = 7;
  const EDNetwork net(prepare_case(make_synthetic_case(opt)).system);
  const EDInstance inst = net.reference_instance();
  for (auto _ : state) benchmark::DoNotOptimize(solve_reference(inst));
}
BENCHMARK(BM_SolveReference)->Args({40, 30})->Args({118, 54})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
