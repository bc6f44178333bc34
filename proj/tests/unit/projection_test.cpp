#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "e2elr/error.hpp"
#include "e2elr/projection.hpp"
#include "e2elr/rng.hpp"

namespace e2elr {
namespace {

TEST(ProjectHypersimplex, HandKkt) {
  const std::vector<double> x = project_hypersimplex(std::vector<double>{0.9, 0.1}, std::vector<double>{1, 1}, 1.2);
  EXPECT_NEAR(x[0], 1.0, 1e-10);
  EXPECT_NEAR(x[1], 0.2, 1e-10);
}

TEST(ProjectHypersimplex, Idempotent) {
  const std::vector<double> p{0.3, 0.5, 0.2};
  const std::vector<double> pm{1, 1, 1};
  const std::vector<double> x = project_hypersimplex(p, pm, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(x[i], p[i], 1e-12);
}

TEST(ProjectHypersimplex, FullCapacityGivesPmax) {
  const std::vector<double> pm{1, 2};
  EXPECT_EQ(project_hypersimplex(std::vector<double>{0, 0}, pm, 3.0), pm);
}

TEST(ProjectHypersimplex, OutOfRangeDemandIsAnError) {
  const std::vector<double> pm{1, 1};
  EXPECT_THROW(project_hypersimplex(std::vector<double>{0, 0}, pm, 2.5), ContractError);
  EXPECT_THROW(project_hypersimplex(std::vector<double>{0, 0}, pm, -0.1), ContractError);
}

// KKT check on random inputs: x = clip(p + nu) for one nu, on the hypersimplex.
TEST(ProjectHypersimplex, RandomKkt) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(50);
    std::vector<double> p(n), pm(n);
    for (std::size_t i = 0; i < n; ++i) {
      pm[i] = rng.uniform(0.1, 5);
      p[i] = rng.uniform(-3, 6);
    }
    const double D = rng.uniform01() * std::accumulate(pm.begin(), pm.end(), 0.0);
    const std::vector<double> x = project_hypersimplex(p, pm, D);
    EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), D, 1e-9);
    double nu = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(x[i], 0.0);
      ASSERT_LE(x[i], pm[i]);
      if (x[i] > 1e-9 && x[i] < pm[i] - 1e-9) {
        if (std::isnan(nu)) nu = x[i] - p[i];
        EXPECT_NEAR(x[i] - p[i], nu, 1e-9);
      }
    }
    if (!std::isnan(nu)) {
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(x[i], std::clamp(p[i] + nu, 0.0, pm[i]), 1e-9);
      }
    }
  }
}

TEST(ProjectReserveRegion, InsideIsIdentity) {
  const std::vector<double> y{0.3, 0.3};
  EXPECT_EQ(project_reserve_region(y, std::vector<double>{1, 1}, std::vector<double>{0.5, 0.5}, 0.8), y);
}

TEST(ProjectReserveRegion, MeetsRequirement) {
  const std::vector<double> pm{1, 1}, rm{0.5, 0.5};
  const std::vector<double> x = project_reserve_region(std::vector<double>{0.15, 0.95}, pm, rm, 0.8);
  double avail = 0;
  for (std::size_t g = 0; g < 2; ++g) avail += std::min(rm[g], pm[g] - x[g]);
  EXPECT_NEAR(avail, 0.8, 1e-12);
  EXPECT_NEAR(x[0], 0.15, 1e-12);
  EXPECT_NEAR(x[1], 0.7, 1e-12);
}

TEST(ProjectFeasibleEdr, FeasibleIsFixedPoint) {
  const EDInstance inst = make_instance({1, 1}, {0.5, 0.5}, {1, 1}, 1.1, 0.8);
  const std::vector<double> p{0.55, 0.55};
  const std::vector<double> x = project_feasible_edr(p, inst);
  EXPECT_NEAR(x[0], p[0], 1e-8);
  EXPECT_NEAR(x[1], p[1], 1e-8);
}

TEST(ProjectFeasibleEdr, TwoUnitMatchesGridOnSegment) {
  const EDInstance inst = make_instance({1, 1}, {0.5, 0.5}, {1, 1}, 1.1, 0.8);
  const std::vector<double> p{0.15, 0.95};
  const std::vector<double> x = project_feasible_edr(p, inst);
  EXPECT_NEAR(x[0] + x[1], 1.1, 1e-8);
  EXPECT_LE(reserve_shortage(inst, x), 1e-8);
  // Brute force over x0 on the segment x0 + x1 = 1.1 at 1e-4 steps.
  double best = std::numeric_limits<double>::infinity();
  double arg = 0;
  for (int k = 0; k <= 11000; ++k) {
    const double a = k * 1e-4;
    const double b = 1.1 - a;
    if (b < 0 || b > 1 || a > 1) continue;
    if (std::min(0.5, 1 - a) + std::min(0.5, 1 - b) < 0.8 - 1e-12) continue;
    const double dist = (a - p[0]) * (a - p[0]) + (b - p[1]) * (b - p[1]);
    if (dist < best) {
      best = dist;
      arg = a;
    }
  }
  EXPECT_NEAR(x[0], arg, 1e-6);
  EXPECT_NEAR(x[1], 1.1 - arg, 1e-6);
}

TEST(ProjectFeasibleEdr, InfeasibleInstanceIsAnError) {
  const EDInstance inst = make_instance({1, 1}, {1, 1}, {1, 1}, 1.9, 0.5);
  EXPECT_THROW(project_feasible_edr(std::vector<double>{0.5, 0.5}, inst), ContractError);
}

TEST(ProjectFeasibleEdr, RandomOutputsAreFeasible) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<double> pm(n), rm(n), c(n, 1.0), p(n);
    for (std::size_t g = 0; g < n; ++g) {
      pm[g] = rng.uniform(0.5, 3);
      rm[g] = rng.uniform(0.1, 1.0) * pm[g];
      p[g] = rng.uniform01() * pm[g];
    }
    const double total = std::accumulate(pm.begin(), pm.end(), 0.0);
    const double rtotal = std::accumulate(rm.begin(), rm.end(), 0.0);
    const double D = rng.uniform(0.3, 0.7) * total;
    const double R = rng.uniform01() * std::min(rtotal, total - D);
    const EDInstance inst = make_instance(pm, rm, c, D, R);
    const std::vector<double> x = project_feasible_edr(p, inst);
    const FeasibilityReport rep = check_feasibility(inst, x, max_reserves(inst, x), 1e-6);
    EXPECT_TRUE(rep.feasible) << trial << " max violation " << rep.max_violation();
  }
}

}  // namespace
}  // namespace e2elr
