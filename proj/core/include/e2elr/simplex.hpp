#pragma once

// Dense bounded-variable primal simplex.
//
//   min c'x  s.t.  A_i x {<=,>=,=} b_i,  lower <= x <= upper
//
// Two phases with artificial variables, Dantzig pricing that falls back to
// Bland's rule after a run of degenerate pivots, and periodic refactorization
// of the basis. Intended for master problems with at most a few hundred rows.

#include <limits>
#include <string>
#include <vector>

#include "e2elr/matrix.hpp"

namespace e2elr {

enum class RowSense { kLessEqual, kGreaterEqual, kEqual };

struct LinearProgram {
  std::vector<double> cost;
  std::vector<double> lower;  // may be -inf
  std::vector<double> upper;  // may be +inf
  std::vector<std::vector<double>> rows;  // dense constraint rows
  std::vector<RowSense> sense;
  std::vector<double> rhs;

  std::size_t num_vars() const { return cost.size(); }
  std::size_t num_rows() const { return rows.size(); }

  // Adds a variable and returns its index. Existing rows get a zero entry.
  std::size_t add_var(double cost, double lower, double upper);
  void add_row(std::vector<double> coefficients, RowSense sense, double rhs);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };
std::string to_string(LpStatus status);

struct SimplexOptions {
  int max_pivots = 200000;
  int refactor_every = 200;
  int degenerate_before_bland = 50;
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-11;
};

struct LpSolution {
  LpStatus status = LpStatus::kOptimal;
  std::vector<double> x;
  std::vector<double> duals;  // one per row, sign convention of c - A'y
  double objective = 0.0;
  int pivots = 0;
  double max_dual_infeasibility = 0.0;
  double max_primal_infeasibility = 0.0;
};

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace e2elr
