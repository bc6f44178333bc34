#pragma once

// Euclidean projections used as the exact-repair baseline.

#include <span>
#include <vector>

#include "e2elr/ed_core.hpp"
#include "e2elr/error.hpp"

namespace e2elr {

// argmin ||x - p|| s.t. 0 <= x <= p_max, sum x = D. Bisection on the balance
// multiplier nu with x(nu) = clip(p + nu, 0, p_max), followed by an exact
// solve on the final free set. Throws ContractError unless 0 <= D <= sum p_max.
std::vector<double> project_hypersimplex(std::span<const double> p, std::span<const double> p_max,
                                         double D);

// argmin ||x - y|| s.t. sum_g min(r_max_g, p_max_g - x_g) >= R.
std::vector<double> project_reserve_region(std::span<const double> y, std::span<const double> p_max,
                                           std::span<const double> r_max, double R);

class ProjectionError : public ConvergenceError {
 public:
  ProjectionError(const std::string& what, std::vector<double> last)
      : ConvergenceError(what), last_iterate_(std::move(last)) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

struct DykstraOptions {
  double tol = 1e-8;          // infinity-norm change between sweeps
  int max_iterations = 10000;
};

// Projection onto {0 <= x <= p_max, sum x = D, sum min(r_max, p_max - x) >= R}
// by Dykstra's alternating projections. The returned point is the last
// hypersimplex iterate, so balance and bounds hold exactly.
std::vector<double> project_feasible_edr(std::span<const double> p, const EDInstance& inst,
                                         const DykstraOptions& options = {});

}  // namespace e2elr
