#pragma once

// Closed-form repair layers.
//
// Power balance: maps p in the box [0, p_max] onto {sum p = D} by moving every
// generator the same fraction of the way to its upper bound (shortage) or to
// zero (surplus).
//
// Reserve repair: moves a balanced dispatch so that
// sum_g min(r_max_g, p_max_g - p_g) >= R whenever that is attainable, keeping
// the total output unchanged.
//
// Each layer has a handle-returning form with a vector-Jacobian product for
// training, and an in-place form without bookkeeping for post-processing.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "e2elr/ed_core.hpp"

namespace e2elr {

struct RepairContext {
  std::vector<double> p_max;
  std::vector<double> r_max;
  double D = 0.0;
  double R = 0.0;
  double p_max_total = 0.0;
  double r_max_total = 0.0;

  RepairContext() = default;
  RepairContext(std::vector<double> p_max, std::vector<double> r_max, double D, double R);
  explicit RepairContext(const EDInstance& inst);

  std::size_t size() const { return p_max.size(); }
};

// ---------------------------------------------------------------------------
// Power balance.

enum class BalanceBranch : std::uint8_t {
  kShortage,     // sum p < D
  kSurplus,      // sum p >= D
  kAllZero,      // D <= 0
  kAllMax,       // D >= sum p_max
};

struct BalanceHandle {
  BalanceBranch branch = BalanceBranch::kSurplus;
  double eta = 0.0;
  double total = 0.0;      // sum p
  double D = 0.0;
  double p_max_total = 0.0;
  std::vector<double> p;
  std::vector<double> p_max;
};

struct BalanceResult {
  std::vector<double> p;
  BalanceHandle handle;
};

BalanceResult power_balance_repair(std::span<const double> p, const RepairContext& ctx);
std::vector<double> power_balance_vjp(const BalanceHandle& handle, std::span<const double> cotangent);

// In place, no handle. Same preconditions as power_balance_repair.
void apply_power_balance_repair(std::span<double> p, const RepairContext& ctx);

// Repair onto {l <= y <= u, a'y = b}. Coordinates move toward the corner that
// raises a'y (shortage) or lowers it (surplus); a_i = 0 leaves y_i = x_i.
std::vector<double> generalized_simplex_repair(std::span<const double> x, std::span<const double> l,
                                               std::span<const double> u, std::span<const double> a,
                                               double b);

// ---------------------------------------------------------------------------
// Reserves.

// r_g = min(r_max_g, p_max_g - p_g).
std::vector<double> recover_reserves(std::span<const double> p, const RepairContext& ctx);

enum class ReserveBranch : std::uint8_t {
  kNone,        // Delta = 0, identity
  kRequirement, // Delta = Delta_R
  kUp,          // Delta = Delta_up
  kDown,        // Delta = Delta_down
};

struct ReserveHandle {
  ReserveBranch branch = ReserveBranch::kNone;
  double delta = 0.0;
  double delta_up = 0.0;
  double delta_down = 0.0;
  double alpha_up = 0.0;
  double alpha_down = 0.0;
  std::vector<double> p;
  std::vector<double> target;        // p_max - r_max
  std::vector<std::uint8_t> in_up;   // 1 for p_g <= p_max_g - r_max_g
};

struct ReserveResult {
  std::vector<double> p;
  ReserveHandle handle;
};

ReserveResult reserve_repair(std::span<const double> p, const RepairContext& ctx);
std::vector<double> reserve_repair_vjp(const ReserveHandle& handle, std::span<const double> cotangent);

void apply_reserve_repair(std::span<double> p, const RepairContext& ctx);

// ---------------------------------------------------------------------------
// Feasibility certificate.

struct FeasibilityCertificate {
  bool feasible = false;
  std::string witness;            // failed condition, empty when feasible
  std::vector<double> dispatch;   // reserve_repair(power_balance_repair(0))
  std::vector<double> reserves;   // recover_reserves(dispatch)
};

// The instance admits a dispatch with enough reserves iff
//   0 <= D <= sum p_max,  sum p_max - D >= R  and  sum r_max >= R.
FeasibilityCertificate feasibility_certificate(const RepairContext& ctx);

}  // namespace e2elr
