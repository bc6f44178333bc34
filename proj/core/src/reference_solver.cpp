#include <algorithm>
#include <cmath>
#include <numeric>

#include "e2elr/ed_core.hpp"
#include "e2elr/repair.hpp"
#include "e2elr/simplex.hpp"

namespace e2elr {

namespace {

struct Master {
  LinearProgram lp;
  std::size_t n_gen = 0;
  bool with_reserves = false;
  std::vector<std::size_t> thermal_branch;  // branch of each slack variable
};

Master build_master(const EDInstance& inst) {
  Master m;
  const std::size_t G = inst.num_generators();
  m.n_gen = G;
  m.with_reserves = inst.R > 0.0;
  for (std::size_t g = 0; g < G; ++g) m.lp.add_var(inst.c[g], 0.0, inst.p_max[g]);
  if (m.with_reserves) {
    for (std::size_t g = 0; g < G; ++g) m.lp.add_var(0.0, 0.0, inst.r_max[g]);
  }
  const std::size_t nv = m.lp.num_vars();

  std::vector<double> row(nv, 0.0);
  for (std::size_t g = 0; g < G; ++g) row[g] = 1.0;
  m.lp.add_row(row, RowSense::kEqual, inst.D);
  if (m.with_reserves) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t g = 0; g < G; ++g) row[G + g] = 1.0;
    m.lp.add_row(row, RowSense::kGreaterEqual, inst.R);
    for (std::size_t g = 0; g < G; ++g) {
      std::fill(row.begin(), row.end(), 0.0);
      row[g] = 1.0;
      row[G + g] = 1.0;
      m.lp.add_row(row, RowSense::kLessEqual, inst.p_max[g]);
    }
  }
  return m;
}

void add_thermal_rows(Master& m, const EDInstance& inst, std::size_t e) {
  const double price = inst.prices.thermal;
  const std::size_t xi = m.lp.add_var(price, 0.0, std::numeric_limits<double>::infinity());
  m.thermal_branch.push_back(e);
  const auto ptdf_row = inst.gen_ptdf->row(e);
  std::vector<double> row(m.lp.num_vars(), 0.0);
  for (std::size_t g = 0; g < m.n_gen; ++g) row[g] = ptdf_row[g];
  if (std::isfinite(inst.f_max[e])) {
    row[xi] = -1.0;
    m.lp.add_row(row, RowSense::kLessEqual, inst.f_max[e] - inst.flow_offset[e]);
  }
  if (std::isfinite(inst.f_min[e])) {
    row[xi] = 1.0;
    m.lp.add_row(row, RowSense::kGreaterEqual, inst.f_min[e] - inst.flow_offset[e]);
  }
}

}  // namespace

DispatchSolution solve_reference(const EDInstance& inst, const ReferenceSolverOptions& options) {
  DispatchSolution sol;
  const std::size_t G = inst.num_generators();
  const RepairContext ctx(inst);
  if (!feasibility_certificate(ctx).feasible) {
    sol.status = SolveStatus::kInfeasible;
    return sol;
  }

  Master master = build_master(inst);
  std::vector<bool> added(inst.num_branches(), false);
  SimplexOptions simplex;
  int pivot_budget = options.max_pivots;

  for (int round = 0; round < options.max_rounds; ++round) {
    simplex.max_pivots = pivot_budget;
    const LpSolution lp = solve_lp(master.lp, simplex);
    sol.rounds = round + 1;
    sol.pivots += lp.pivots;
    pivot_budget -= lp.pivots;
    if (lp.status == LpStatus::kIterationLimit) {
      sol.status = SolveStatus::kIterationLimit;
      return sol;
    }
    if (lp.status != LpStatus::kOptimal) {
      // The master is always feasible and bounded once the certificate passes.
      throw NumericalError("master LP ended with status " + to_string(lp.status));
    }
    sol.max_dual_infeasibility = lp.max_dual_infeasibility;
    sol.p.assign(lp.x.begin(), lp.x.begin() + static_cast<std::ptrdiff_t>(G));
    for (std::size_t g = 0; g < G; ++g) sol.p[g] = std::clamp(sol.p[g], 0.0, inst.p_max[g]);

    const std::vector<double> xi = thermal_violations(inst, sol.p);
    std::vector<std::size_t> violated;
    for (std::size_t e = 0; e < xi.size(); ++e) {
      if (!added[e] && xi[e] > options.tol) violated.push_back(e);
    }
    if (violated.empty()) {
      sol.xi_th = xi;
      sol.r = max_reserves(inst, sol.p);
      sol.objective = objective_value(inst, sol.p);
      sol.status = SolveStatus::kOptimal;
      return sol;
    }
    std::stable_sort(violated.begin(), violated.end(),
                     [&](std::size_t a, std::size_t b) { return xi[a] > xi[b]; });
    const std::size_t take = std::min<std::size_t>(violated.size(), static_cast<std::size_t>(options.rows_per_round));
    for (std::size_t k = 0; k < take; ++k) {
      add_thermal_rows(master, inst, violated[k]);
      added[violated[k]] = true;
      ++sol.thermal_rows;
    }
  }
  sol.status = SolveStatus::kIterationLimit;
  return sol;
}

}  // namespace e2elr
