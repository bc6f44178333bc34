#include "e2elr/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "e2elr/error.hpp"

namespace e2elr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& options)
      : options_(options), m_(lp.num_rows()), n_(lp.num_vars()) {
    // Columns: structural, one slack per row, then artificials as needed.
    std::vector<double> x0(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lp.lower[j])) {
        x0[j] = lp.lower[j];
      } else if (std::isfinite(lp.upper[j])) {
        x0[j] = lp.upper[j];
      } else {
        x0[j] = 0.0;
      }
    }
    std::vector<double> slack_lo(m_), slack_hi(m_), residual(m_);
    std::vector<int> art_sign(m_, 0);
    std::size_t artificials = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      switch (lp.sense[i]) {
        case RowSense::kLessEqual: slack_lo[i] = 0.0; slack_hi[i] = kInf; break;
        case RowSense::kGreaterEqual: slack_lo[i] = -kInf; slack_hi[i] = 0.0; break;
        case RowSense::kEqual: slack_lo[i] = 0.0; slack_hi[i] = 0.0; break;
      }
      double r = lp.rhs[i];
      for (std::size_t j = 0; j < n_; ++j) r -= lp.rows[i][j] * x0[j];
      residual[i] = r;
      if (r < slack_lo[i] || r > slack_hi[i]) {
        art_sign[i] = r > 0.0 ? 1 : -1;
        ++artificials;
      }
    }

    cols_ = n_ + m_ + artificials;
    a_ = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(cols_));
    b_.resize(static_cast<Eigen::Index>(m_));
    lo_.assign(cols_, 0.0);
    hi_.assign(cols_, 0.0);
    cost_.assign(cols_, 0.0);
    x_.assign(cols_, 0.0);
    artificial_.assign(cols_, false);
    basis_.assign(m_, 0);
    basic_row_.assign(cols_, -1);

    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp.lower[j];
      hi_[j] = lp.upper[j];
      cost_[j] = lp.cost[j];
      x_[j] = x0[j];
    }
    std::size_t next_art = n_ + m_;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto ri = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < n_; ++j) a_(ri, static_cast<Eigen::Index>(j)) = lp.rows[i][j];
      b_(ri) = lp.rhs[i];
      const std::size_t s = n_ + i;
      a_(ri, static_cast<Eigen::Index>(s)) = 1.0;
      lo_[s] = slack_lo[i];
      hi_[s] = slack_hi[i];
      if (art_sign[i] == 0) {
        x_[s] = residual[i];
        set_basic(i, s);
      } else {
        x_[s] = 0.0;
        const std::size_t k = next_art++;
        a_(ri, static_cast<Eigen::Index>(k)) = art_sign[i];
        lo_[k] = 0.0;
        hi_[k] = kInf;
        x_[k] = std::abs(residual[i]);
        artificial_[k] = true;
        set_basic(i, k);
      }
    }
  }

  LpSolution solve() {
    LpSolution out;
    const bool need_phase1 = cols_ > n_ + m_;
    if (need_phase1) {
      std::vector<double> phase1(cols_, 0.0);
      for (std::size_t j = 0; j < cols_; ++j) phase1[j] = artificial_[j] ? 1.0 : 0.0;
      active_cost_ = phase1;
      refactor();
      const LpStatus st = iterate(out.pivots);
      if (st == LpStatus::kIterationLimit) return finish(out, st);
      double infeasibility = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (artificial_[j]) infeasibility += x_[j];
      }
      double scale = 1.0;
      for (Eigen::Index i = 0; i < b_.size(); ++i) scale = std::max(scale, std::abs(b_(i)));
      if (infeasibility > 1e-8 * scale) return finish(out, LpStatus::kInfeasible);
      drive_out_artificials();
    }
    active_cost_ = cost_;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (artificial_[j]) active_cost_[j] = 0.0;
    }
    refactor();
    const LpStatus st = iterate(out.pivots);
    return finish(out, st);
  }

 private:
  void set_basic(std::size_t row, std::size_t col) {
    basis_[row] = col;
    basic_row_[col] = static_cast<int>(row);
  }

  // Rebuilds the tableau, basic values and reduced costs from the original data.
  void refactor() {
    const auto m = static_cast<Eigen::Index>(m_);
    Matrix basis_matrix(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      basis_matrix.col(k) = a_.col(static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(k)]));
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    tableau_ = lu.solve(Eigen::MatrixXd(a_));
    Eigen::VectorXd rhs = b_;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (basic_row_[j] < 0 && x_[j] != 0.0) rhs -= a_.col(static_cast<Eigen::Index>(j)) * x_[j];
    }
    const Eigen::VectorXd xb = lu.solve(rhs);
    for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] = xb(static_cast<Eigen::Index>(i));
    reduced_.assign(cols_, 0.0);
    for (std::size_t j = 0; j < cols_; ++j) {
      double d = active_cost_[j];
      for (std::size_t i = 0; i < m_; ++i) {
        d -= active_cost_[basis_[i]] * tableau_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      reduced_[j] = basic_row_[j] >= 0 ? 0.0 : d;
    }
    since_refactor_ = 0;
  }

  void pivot(std::size_t r, std::size_t q) {
    const auto rr = static_cast<Eigen::Index>(r);
    const auto qq = static_cast<Eigen::Index>(q);
    tableau_.row(rr) /= tableau_(rr, qq);
    for (Eigen::Index i = 0; i < tableau_.rows(); ++i) {
      if (i == rr) continue;
      const double f = tableau_(i, qq);
      if (f != 0.0) tableau_.row(i) -= f * tableau_.row(rr);
    }
    const double dq = reduced_[q];
    if (dq != 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= dq * tableau_(rr, static_cast<Eigen::Index>(j));
    }
    reduced_[q] = 0.0;
    basic_row_[basis_[r]] = -1;
    set_basic(r, q);
    if (++since_refactor_ >= options_.refactor_every) refactor();
  }

  LpStatus iterate(int& pivots) {
    int degenerate_run = 0;
    while (true) {
      const bool bland = degenerate_run >= options_.degenerate_before_bland;
      std::size_t q = cols_;
      int dir = 0;
      double best = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (basic_row_[j] >= 0 || lo_[j] == hi_[j]) continue;
        const double d = reduced_[j];
        int jdir = 0;
        if (d < -options_.dual_tol && x_[j] < hi_[j]) jdir = 1;
        if (d > options_.dual_tol && x_[j] > lo_[j]) jdir = -1;
        if (jdir == 0) continue;
        if (bland) {
          q = j;
          dir = jdir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dir = jdir;
        }
      }
      if (q == cols_) return LpStatus::kOptimal;
      if (pivots >= options_.max_pivots) return LpStatus::kIterationLimit;

      const auto qq = static_cast<Eigen::Index>(q);
      double step = kInf;
      std::size_t leave = m_;
      double leave_alpha = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = dir * tableau_(static_cast<Eigen::Index>(i), qq);
        const std::size_t bvar = basis_[i];
        double limit = kInf;
        if (alpha > options_.pivot_tol && std::isfinite(lo_[bvar])) {
          limit = std::max(0.0, (x_[bvar] - lo_[bvar]) / alpha);
        } else if (alpha < -options_.pivot_tol && std::isfinite(hi_[bvar])) {
          limit = std::max(0.0, (hi_[bvar] - x_[bvar]) / -alpha);
        }
        if (!std::isfinite(limit)) continue;
        bool take = false;
        if (limit < step - 1e-12) {
          take = true;
        } else if (limit <= step + 1e-12 && leave < m_) {
          take = bland ? bvar < basis_[leave] : std::abs(alpha) > std::abs(leave_alpha);
        }
        if (take) {
          step = limit;
          leave = i;
          leave_alpha = alpha;
        }
      }
      const double flip = hi_[q] - lo_[q];
      if (!std::isfinite(step) && !std::isfinite(flip)) return LpStatus::kUnbounded;

      ++pivots;
      const bool bound_flip = flip <= step;
      const double t = bound_flip ? flip : step;
      degenerate_run = t <= 1e-12 ? degenerate_run + 1 : 0;
      if (t != 0.0) {
        for (std::size_t i = 0; i < m_; ++i) {
          x_[basis_[i]] -= dir * t * tableau_(static_cast<Eigen::Index>(i), qq);
        }
      }
      if (bound_flip) {
        x_[q] = dir > 0 ? hi_[q] : lo_[q];
        continue;
      }
      x_[q] += dir * t;
      const std::size_t out = basis_[leave];
      x_[out] = leave_alpha > 0.0 ? lo_[out] : hi_[out];
      pivot(leave, q);
    }
  }

  // After phase 1: fix artificials at zero and swap basic ones for structural
  // or slack columns where the row allows it.
  void drive_out_artificials() {
    for (std::size_t j = 0; j < cols_; ++j) {
      if (!artificial_[j]) continue;
      hi_[j] = 0.0;
      x_[j] = 0.0;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      if (!artificial_[basis_[r]]) continue;
      std::size_t best = cols_;
      double best_abs = 1e-7;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (basic_row_[j] >= 0 || artificial_[j]) continue;
        const double v = std::abs(tableau_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
        if (v > best_abs) {
          best_abs = v;
          best = j;
        }
      }
      if (best < cols_) pivot(r, best);
    }
  }

  LpSolution& finish(LpSolution& out, LpStatus status) {
    refactor();
    out.status = status;
    out.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    out.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) out.objective += cost_[j] * out.x[j];
    out.duals.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double y = 0.0;
      for (std::size_t k = 0; k < m_; ++k) {
        y += active_cost_[basis_[k]] * tableau_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_ + i));
      }
      out.duals[i] = y;
    }
    double dual_inf = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (basic_row_[j] >= 0 || lo_[j] == hi_[j]) continue;
      const double d = reduced_[j];
      const bool at_lo = x_[j] <= lo_[j];
      const bool at_hi = x_[j] >= hi_[j];
      if (at_lo && !at_hi) {
        dual_inf = std::max(dual_inf, -d);
      } else if (at_hi && !at_lo) {
        dual_inf = std::max(dual_inf, d);
      } else {
        dual_inf = std::max(dual_inf, std::abs(d));
      }
    }
    out.max_dual_infeasibility = std::max(0.0, dual_inf);
    double primal_inf = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      primal_inf = std::max({primal_inf, lo_[j] - x_[j], x_[j] - hi_[j]});
    }
    out.max_primal_infeasibility = primal_inf;
    return out;
  }

  SimplexOptions options_;
  std::size_t m_;
  std::size_t n_;
  std::size_t cols_ = 0;
  Matrix a_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd tableau_;
  std::vector<double> lo_, hi_, cost_, active_cost_, x_, reduced_;
  std::vector<bool> artificial_;
  std::vector<std::size_t> basis_;
  std::vector<int> basic_row_;
  int since_refactor_ = 0;
};

}  // namespace

std::size_t LinearProgram::add_var(double c, double lo, double hi) {
  cost.push_back(c);
  lower.push_back(lo);
  upper.push_back(hi);
  for (auto& row : rows) row.push_back(0.0);
  return cost.size() - 1;
}

void LinearProgram::add_row(std::vector<double> coefficients, RowSense s, double b) {
  if (coefficients.size() != num_vars()) {
    throw ContractError("LP row has " + std::to_string(coefficients.size()) +
                        " coefficients, expected " + std::to_string(num_vars()));
  }
  rows.push_back(std::move(coefficients));
  sense.push_back(s);
  rhs.push_back(b);
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  const std::size_t n = lp.num_vars();
  if (lp.lower.size() != n || lp.upper.size() != n || lp.sense.size() != lp.num_rows() ||
      lp.rhs.size() != lp.num_rows()) {
    throw ContractError("inconsistent LP dimensions");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (lp.lower[j] > lp.upper[j]) {
      LpSolution out;
      out.status = LpStatus::kInfeasible;
      return out;
    }
  }
  if (lp.num_rows() == 0) {
    // Each variable sits at its cheapest bound.
    LpSolution out;
    out.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double c = lp.cost[j];
      const double v = c > 0.0 ? lp.lower[j] : c < 0.0 ? lp.upper[j]
                       : std::isfinite(lp.lower[j]) ? lp.lower[j] : std::isfinite(lp.upper[j]) ? lp.upper[j] : 0.0;
      if (!std::isfinite(v)) {
        out.status = LpStatus::kUnbounded;
        return out;
      }
      out.x[j] = v;
      out.objective += c * v;
    }
    return out;
  }
  Tableau tableau(lp, options);
  return tableau.solve();
}

}  // namespace e2elr
