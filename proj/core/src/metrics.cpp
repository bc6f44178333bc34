#include "e2elr/metrics.hpp"

#include <cmath>
#include <vector>

#include "e2elr/error.hpp"

namespace e2elr {

double optimality_gap(double z_hat, double z_star) {
  if (z_star == 0.0) throw ContractError("optimality gap is undefined for a zero reference objective");
  return (z_hat - z_star) / std::abs(z_star);
}

double shifted_geometric_mean(std::span<const double> values, double shift) {
  if (values.empty()) throw ContractError("shifted geometric mean of an empty list");
  double acc = 0.0;
  for (double v : values) {
    if (!(v + shift > 0.0)) throw ContractError("value at or below -shift in shifted geometric mean");
    acc += std::log(v + shift);
  }
  return std::exp(acc / static_cast<double>(values.size())) - shift;
}

FeasibilitySummary feasibility_rate(std::span<const double> violations, double tol) {
  FeasibilitySummary s;
  if (violations.empty()) return s;
  std::vector<double> bad;
  for (double v : violations) {
    if (v > tol) bad.push_back(v);
  }
  s.percent_feasible = 100.0 * static_cast<double>(violations.size() - bad.size()) /
                       static_cast<double>(violations.size());
  if (!bad.empty()) s.mean_violation = shifted_geometric_mean(bad, kViolationShift);
  return s;
}

}  // namespace e2elr
