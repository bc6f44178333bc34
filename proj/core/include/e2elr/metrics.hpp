#pragma once

#include <optional>
#include <span>

namespace e2elr {

// (z_hat - z_star) / |z_star|. Throws ContractError when z_star == 0.
double optimality_gap(double z_hat, double z_star);

// exp(mean(log(x_i + s))) - s. Throws ContractError on an empty input or when
// some x_i <= -s.
double shifted_geometric_mean(std::span<const double> values, double shift);

inline constexpr double kGapShift = 0.01;
inline constexpr double kViolationShift = 1.0;
inline constexpr double kFeasibilityTol = 1e-4;

struct FeasibilitySummary {
  double percent_feasible = 0.0;
  std::optional<double> mean_violation;  // over infeasible entries only
};

// `violations` are per-prediction maximum violations in p.u.
FeasibilitySummary feasibility_rate(std::span<const double> violations, double tol = kFeasibilityTol);

}  // namespace e2elr
