#pragma once

// Economic dispatch with reserves:
//
//   min  c'p + M_th |xi|_1
//   s.t. e'p = e'd,  e'r >= R,  p + r <= p_max,
//        0 <= p <= p_max,  0 <= r <= r_max,
//        f_min - xi <= PTDF (A p - d) <= f_max + xi,  xi >= 0
//
// Dispatch quantities are per-unit. Money is reported in $/h: every price is
// applied to a per-unit quantity and multiplied by `money_scale`, which is the
// case base MVA (so a $/MW price times a p.u. amount times base MVA is $).

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "e2elr/error.hpp"
#include "e2elr/grid_model.hpp"
#include "e2elr/matrix.hpp"
#include "e2elr/scalar.hpp"

namespace e2elr {

struct PenaltyPrices {
  double thermal = 1500.0;  // M_th, $/MW
  double balance = 3500.0;  // M_pb, $/MW (value of lost load)
  double reserve = 1100.0;  // M_r,  $/MW (reserve shortage price)
};

struct EDInstance {
  std::vector<double> d;      // nodal demand, p.u.
  double D = 0.0;             // e'd
  double R = 0.0;             // reserve requirement, p.u.
  std::vector<double> p_max;  // per generator
  std::vector<double> r_max;
  std::vector<double> c;      // $/MWh
  std::vector<double> f_min;  // per branch
  std::vector<double> f_max;
  // PTDF restricted to generator injections (|E| x |G|) and the flow caused by
  // demand alone; flows = gen_ptdf * p + flow_offset. Null without a network.
  std::shared_ptr<const DenseMatrix> gen_ptdf;
  std::vector<double> flow_offset;
  double money_scale = 1.0;
  PenaltyPrices prices;

  std::size_t num_generators() const { return p_max.size(); }
  std::size_t num_branches() const { return f_max.size(); }
  bool has_network() const { return gen_ptdf != nullptr && !f_max.empty(); }
};

// A normalized case with its PTDF, shared by every instance drawn from it.
class EDNetwork {
 public:
  // `system` must have p_min = 0 (see normalize_case). The PTDF is computed
  // when `system.ptdf` is empty.
  explicit EDNetwork(SystemCase system);

  const SystemCase& system() const { return system_; }
  const DenseMatrix& ptdf() const { return system_.ptdf; }
  const std::shared_ptr<const DenseMatrix>& gen_ptdf() const { return gen_ptdf_; }

  EDInstance instance(std::vector<double> d, double R, PenaltyPrices prices = {}) const;
  EDInstance reference_instance(double R = 0.0) const { return instance(system_.demand(), R); }

 private:
  SystemCase system_;
  std::shared_ptr<const DenseMatrix> gen_ptdf_;
};

// Small instance without a network (no thermal constraints).
EDInstance make_instance(std::vector<double> p_max, std::vector<double> r_max,
                         std::vector<double> c, double D, double R, double money_scale = 1.0);

// ---------------------------------------------------------------------------
// Generic evaluation. S is double or ad::Var.

template <class S>
S branch_flow(const EDInstance& inst, std::span<const S> p, std::size_t e) {
  return lincomb(p, inst.gen_ptdf->row(e), inst.flow_offset[e]);
}

// Sum of thermal slack |xi_th(p)|_1.
template <class S>
S thermal_violation_total(const EDInstance& inst, std::span<const S> p) {
  S total = constant_like(p[0], 0.0);
  if (!inst.has_network()) return total;
  for (std::size_t e = 0; e < inst.num_branches(); ++e) {
    const bool upper = std::isfinite(inst.f_max[e]);
    const bool lower = std::isfinite(inst.f_min[e]);
    if (!upper && !lower) continue;
    const S flow = branch_flow(inst, p, e);
    if (upper) total = total + pos(flow - inst.f_max[e]);
    if (lower) total = total + pos(inst.f_min[e] - flow);
  }
  return total;
}

// Generation cost c'p in $/h.
template <class S>
S generation_cost(const EDInstance& inst, std::span<const S> p) {
  return lincomb(p, std::span<const double>(inst.c), 0.0) * inst.money_scale;
}

// c(p) + M_th |xi_th(p)|_1
template <class S>
S objective(const EDInstance& inst, std::span<const S> p) {
  return generation_cost(inst, p) +
         thermal_violation_total(inst, p) * (inst.prices.thermal * inst.money_scale);
}

// |e'p - e'd|
template <class S>
S balance_violation(const EDInstance& inst, std::span<const S> p) {
  return abs_value(sum(p) - inst.D);
}

// max{0, R - sum_g min(r_max_g, p_max_g - p_g)}
template <class S>
S reserve_shortfall(const EDInstance& inst, std::span<const S> p) {
  S available = constant_like(p[0], 0.0);
  for (std::size_t g = 0; g < p.size(); ++g) {
    available = available + min_const(inst.p_max[g] - p[g], inst.r_max[g]);
  }
  return pos(inst.R - available);
}

// M_pb |e'p - D| + M_r xi_r(p), in $/h.
template <class S>
S hard_penalty(const EDInstance& inst, std::span<const S> p) {
  return (balance_violation(inst, p) * inst.prices.balance +
          reserve_shortfall(inst, p) * inst.prices.reserve) *
         inst.money_scale;
}

// ---------------------------------------------------------------------------
// Double-valued API.

double objective_value(const EDInstance& inst, std::span<const double> p);
std::vector<double> thermal_violations(const EDInstance& inst, std::span<const double> p);
std::vector<double> branch_flows(const EDInstance& inst, std::span<const double> p);
double reserve_shortage(const EDInstance& inst, std::span<const double> p);
double penalized_objective(const EDInstance& inst, std::span<const double> p);

struct FeasibilityReport {
  bool feasible = true;
  double balance = 0.0;          // |e'p - e'd|
  double reserve = 0.0;          // max(0, R - e'r)
  double eco_max = 0.0;          // max_g (p + r - p_max)+
  double dispatch_bounds = 0.0;  // max_g max(-p, p - p_max)+
  double reserve_bounds = 0.0;   // max_g max(-r, r - r_max)+

  double max_violation() const;
};

// Hard constraints only; thermal limits are soft and not checked.
FeasibilityReport check_feasibility(const EDInstance& inst, std::span<const double> p,
                                    std::span<const double> r, double tol = 1e-4);

// r_g = clamp(min(r_max_g, p_max_g - p_g), 0, r_max_g): maximal reserves for a
// dispatch that may sit outside its bounds.
std::vector<double> max_reserves(const EDInstance& inst, std::span<const double> p);

// ---------------------------------------------------------------------------
// Reference solver.

enum class SolveStatus { kOptimal, kInfeasible, kIterationLimit };
std::string to_string(SolveStatus status);

struct DispatchSolution {
  std::vector<double> p;
  std::vector<double> r;
  std::vector<double> xi_th;
  double objective = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int rounds = 0;             // lazy-constraint rounds
  int thermal_rows = 0;       // branches added to the master
  int pivots = 0;
  double max_dual_infeasibility = 0.0;
};

struct ReferenceSolverOptions {
  double tol = 1e-8;          // thermal violation accepted without adding a row
  int rows_per_round = 20;    // K most violated branches added per round
  int max_rounds = 200;
  int max_pivots = 200000;
};

// Exact optimum of the ED LP. Thermal rows are generated lazily; the master is
// solved with the dense bounded-variable simplex in simplex.hpp. Reserves in
// the returned solution are the maximal ones for the optimal p.
DispatchSolution solve_reference(const EDInstance& inst, const ReferenceSolverOptions& options = {});

}  // namespace e2elr
