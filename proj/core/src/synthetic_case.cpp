#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "e2elr/error.hpp"
#include "e2elr/grid_model.hpp"
#include "e2elr/rng.hpp"

namespace e2elr {

SystemCase make_synthetic_case(const SyntheticCaseOptions& options) {
  if (options.num_buses < 2 || options.num_generators < 2) {
    throw ContractError("synthetic case needs at least 2 buses and 2 generators");
  }
  Rng rng(options.seed);
  const int n = options.num_buses;

  SystemCase system;
  system.base_mva = options.base_mva;
  system.slack_bus = 1;
  for (int i = 1; i <= n; ++i) system.buses.push_back({i, 0.0});

  std::set<std::pair<int, int>> used;
  auto add_branch = [&](int a, int b) {
    if (a == b || used.count({std::min(a, b), std::max(a, b)})) return false;
    used.insert({std::min(a, b), std::max(a, b)});
    Branch br;
    br.from_bus = a;
    br.to_bus = b;
    br.reactance_pu = rng.uniform(0.05, 0.25);
    system.branches.push_back(br);
    return true;
  };
  for (int i = 1; i <= n; ++i) add_branch(i, i % n + 1);
  if (n > 3) {
    int chords = n / 2;
    for (int tries = 0; chords > 0 && tries < 50 * n; ++tries) {
      const int a = 1 + static_cast<int>(rng.below(n));
      const int b = 1 + static_cast<int>(rng.below(n));
      if (add_branch(a, b)) --chords;
    }
  }

  std::vector<int> buses(n);
  std::iota(buses.begin(), buses.end(), 1);
  rng.shuffle(std::span<int>(buses));
  for (int g = 0; g < options.num_generators; ++g) {
    Generator gen;
    gen.bus = buses[g % n];
    gen.p_max_pu = rng.uniform(0.5, 3.0);
    gen.r_max_pu = gen.p_max_pu;
    gen.cost_linear = rng.uniform(10.0, 80.0);
    system.generators.push_back(gen);
  }

  double capacity = 0.0;
  for (const Generator& g : system.generators) capacity += g.p_max_pu;
  std::vector<double> weight(n, 0.0);
  for (int i = 0; i < n; ++i) weight[i] = rng.bernoulli(0.8) ? rng.uniform(0.3, 1.7) : 0.0;
  double total_weight = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (total_weight == 0.0) {
    weight[0] = 1.0;
    total_weight = 1.0;
  }
  const double total_demand = options.load_factor * capacity;
  for (int i = 0; i < n; ++i) system.buses[i].demand_pu = total_demand * weight[i] / total_weight;

  // Merit-order dispatch at the reference load sets the thermal limits.
  std::vector<std::size_t> order(system.generators.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return system.generators[a].cost_linear < system.generators[b].cost_linear;
  });
  std::vector<double> injection(n, 0.0);
  double remaining = total_demand;
  for (std::size_t g : order) {
    const double p = std::min(remaining, system.generators[g].p_max_pu);
    injection[system.bus_index(system.generators[g].bus)] += p;
    remaining -= p;
  }
  for (int i = 0; i < n; ++i) injection[i] -= system.buses[i].demand_pu;

  const DenseMatrix ptdf = compute_ptdf(system);
  const std::vector<double> flows = ptdf_flows(ptdf, injection);
  std::vector<std::size_t> by_flow(flows.size());
  std::iota(by_flow.begin(), by_flow.end(), 0);
  std::stable_sort(by_flow.begin(), by_flow.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(flows[a]) > std::abs(flows[b]); });
  const auto congested = static_cast<std::size_t>(
      std::ceil(options.congested_fraction * static_cast<double>(flows.size())));
  for (std::size_t k = 0; k < by_flow.size(); ++k) {
    const std::size_t e = by_flow[k];
    const double f = std::abs(flows[e]);
    const double limit = k < congested ? 0.8 * f : 1.6 * f + 0.3;
    system.branches[e].flow_max_pu = limit;
    system.branches[e].flow_min_pu = -limit;
  }
  validate_case(system);
  return system;
}

}  // namespace e2elr
