#include "e2elr/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace e2elr {

namespace {

constexpr double kSumTol = 1e-10;

double clipped_sum(std::span<const double> p, std::span<const double> p_max, double nu) {
  double a0 = 0.0, a1 = 0.0;
  std::size_t i = 0;
  const std::size_t n = p.size();
  for (; i + 2 <= n; i += 2) {
    a0 += std::min(p_max[i], std::max(0.0, p[i] + nu));
    a1 += std::min(p_max[i + 1], std::max(0.0, p[i + 1] + nu));
  }
  for (; i < n; ++i) a0 += std::min(p_max[i], std::max(0.0, p[i] + nu));
  return a0 + a1;
}

}  // namespace

std::vector<double> project_hypersimplex(std::span<const double> p, std::span<const double> p_max,
                                         double D) {
  const std::size_t n = p.size();
  if (p_max.size() != n) throw ContractError("p and p_max differ in length");
  const double total_max = std::accumulate(p_max.begin(), p_max.end(), 0.0);
  if (!(D >= 0.0 && D <= total_max)) {
    throw ContractError("projection needs 0 <= D <= sum p_max");
  }
  if (D == 0.0) return std::vector<double>(n, 0.0);
  if (D == total_max) return {p_max.begin(), p_max.end()};

  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (first || -p[i] < lo) lo = -p[i];
    if (first || p_max[i] - p[i] > hi) hi = p_max[i] - p[i];
    first = false;
  }
  double nu = 0.5 * (lo + hi);
  double s = clipped_sum(p, p_max, nu);
  for (int it = 0; it < 200 && std::abs(s - D) > kSumTol; ++it) {
    if (s < D) {
      lo = nu;
    } else {
      hi = nu;
    }
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    nu = mid;
    s = clipped_sum(p, p_max, nu);
  }

  // Exact multiplier for the free set identified by the bisection.
  double fixed = 0.0, free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = p[i] + nu;
    if (v >= p_max[i]) {
      fixed += p_max[i];
    } else if (v > 0.0) {
      free_sum += p[i];
      ++free_count;
    }
  }
  std::vector<double> x(n);
  if (free_count > 0) {
    const double exact = (D - fixed - free_sum) / static_cast<double>(free_count);
    bool consistent = true;
    for (std::size_t i = 0; i < n && consistent; ++i) {
      const double v = p[i] + nu;
      const double w = p[i] + exact;
      if (v >= p_max[i]) {
        consistent = w >= p_max[i];
      } else if (v > 0.0) {
        consistent = w > 0.0 && w < p_max[i];
      } else {
        consistent = w <= 0.0;
      }
    }
    if (consistent) nu = exact;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = std::min(p_max[i], std::max(0.0, p[i] + nu));
  return x;
}

std::vector<double> project_reserve_region(std::span<const double> y, std::span<const double> p_max,
                                           std::span<const double> r_max, double R) {
  const std::size_t n = y.size();
  if (p_max.size() != n || r_max.size() != n) throw ContractError("reserve projection dimension mismatch");
  double available = 0.0;
  double r_total = 0.0;
  std::vector<double> excess;  // y_g - (p_max_g - r_max_g) where positive
  for (std::size_t g = 0; g < n; ++g) {
    available += std::min(r_max[g], p_max[g] - y[g]);
    r_total += r_max[g];
    const double b = y[g] - (p_max[g] - r_max[g]);
    if (b > 0.0) excess.push_back(b);
  }
  std::vector<double> x(y.begin(), y.end());
  if (available >= R) return x;
  const double budget = r_total - R;
  if (budget < 0.0) throw ContractError("reserve region is empty: sum r_max < R");

  // Find lambda >= 0 with sum_g max(0, b_g - lambda) = budget.
  std::sort(excess.begin(), excess.end(), std::greater<>());
  double lambda = 0.0;
  double prefix = 0.0;
  for (std::size_t k = 0; k < excess.size(); ++k) {
    prefix += excess[k];
    const double candidate = (prefix - budget) / static_cast<double>(k + 1);
    const double next = k + 1 < excess.size() ? excess[k + 1] : 0.0;
    if (candidate >= next) {
      lambda = std::max(0.0, candidate);
      break;
    }
  }
  for (std::size_t g = 0; g < n; ++g) {
    const double t = p_max[g] - r_max[g];
    if (y[g] > t) x[g] = t + std::max(0.0, y[g] - t - lambda);
  }
  return x;
}

std::vector<double> project_feasible_edr(std::span<const double> p, const EDInstance& inst,
                                         const DykstraOptions& options) {
  const std::size_t n = inst.num_generators();
  if (p.size() != n) throw ContractError("dispatch dimension mismatch");
  const double total_max = std::accumulate(inst.p_max.begin(), inst.p_max.end(), 0.0);
  const double r_total = std::accumulate(inst.r_max.begin(), inst.r_max.end(), 0.0);
  if (inst.D < 0.0 || inst.D > total_max || total_max - inst.D < inst.R || r_total < inst.R) {
    throw ContractError("projection target set is empty for this instance");
  }

  std::vector<double> x(p.begin(), p.end());
  std::vector<double> y(n), shift_a(n, 0.0), shift_b(n, 0.0), work(n);
  std::vector<double> y_prev;
  for (int it = 0; it < options.max_iterations; ++it) {
    for (std::size_t g = 0; g < n; ++g) work[g] = x[g] + shift_a[g];
    std::vector<double> y_next = project_hypersimplex(work, inst.p_max, inst.D);
    for (std::size_t g = 0; g < n; ++g) shift_a[g] = work[g] - y_next[g];
    for (std::size_t g = 0; g < n; ++g) work[g] = y_next[g] + shift_b[g];
    std::vector<double> x_next = project_reserve_region(work, inst.p_max, inst.r_max, inst.R);
    for (std::size_t g = 0; g < n; ++g) shift_b[g] = work[g] - x_next[g];

    double move = 0.0;
    for (std::size_t g = 0; g < n; ++g) {
      move = std::max(move, std::abs(x_next[g] - x[g]));
      if (it > 0) move = std::max(move, std::abs(y_next[g] - y[g]));
    }
    x = std::move(x_next);
    y = std::move(y_next);
    if (it > 0 && move < options.tol) return y;
  }
  throw ProjectionError("Dykstra projection did not converge in " +
                            std::to_string(options.max_iterations) + " iterations",
                        y);
}

}  // namespace e2elr
