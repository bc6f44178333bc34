#include "e2elr/repair.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace e2elr {

namespace {

constexpr double kBoxTol = 1e-9;

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ContractError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                        std::to_string(want));
  }
}

void check_in_box(std::span<const double> p, const RepairContext& ctx) {
  check_length(p.size(), ctx.size(), "dispatch");
  for (std::size_t g = 0; g < p.size(); ++g) {
    if (!(p[g] >= -kBoxTol && p[g] <= ctx.p_max[g] + kBoxTol)) {
      throw ContractError("dispatch outside [0, p_max] at generator " + std::to_string(g));
    }
  }
}

// Balanced input is only meaningful when S_D is nonempty.
void check_balanced(std::span<const double> p, const RepairContext& ctx) {
  check_in_box(p, ctx);
  if (ctx.D < 0.0 || ctx.D > ctx.p_max_total) return;
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(total - ctx.D) > kBoxTol * std::max(1.0, ctx.D)) {
    throw ContractError("reserve repair expects sum p = D");
  }
}

double sum4(std::span<const double> x) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    a0 += x[i];
    a1 += x[i + 1];
    a2 += x[i + 2];
    a3 += x[i + 3];
  }
  for (; i < x.size(); ++i) a0 += x[i];
  return (a0 + a1) + (a2 + a3);
}

struct ReserveStep {
  ReserveBranch branch = ReserveBranch::kNone;
  double delta = 0.0;
  double delta_up = 0.0;
  double delta_down = 0.0;
  double alpha_up = 0.0;
  double alpha_down = 0.0;
};

ReserveStep reserve_step(std::span<const double> p, const RepairContext& ctx) {
  double available = 0.0;
  ReserveStep s;
  for (std::size_t g = 0; g < p.size(); ++g) {
    const double t = ctx.p_max[g] - ctx.r_max[g];
    available += std::min(ctx.r_max[g], ctx.p_max[g] - p[g]);
    if (p[g] <= t) {
      s.delta_up += t - p[g];
    } else {
      s.delta_down += p[g] - t;
    }
  }
  const double delta_r = ctx.R - available;
  double m = delta_r;
  ReserveBranch branch = ReserveBranch::kRequirement;
  if (s.delta_up < m) {
    m = s.delta_up;
    branch = ReserveBranch::kUp;
  }
  if (s.delta_down < m) {
    m = s.delta_down;
    branch = ReserveBranch::kDown;
  }
  if (!(m > 0.0)) return s;
  s.branch = branch;
  s.delta = m;
  s.alpha_up = s.delta_up > 0.0 ? std::min(1.0, m / s.delta_up) : 0.0;
  s.alpha_down = s.delta_down > 0.0 ? std::min(1.0, m / s.delta_down) : 0.0;
  return s;
}

inline double move_toward(double p, double t, double alpha) {
  const double v = p + alpha * (t - p);
  return std::clamp(v, std::min(p, t), std::max(p, t));
}

}  // namespace

RepairContext::RepairContext(std::vector<double> pm, std::vector<double> rm, double d, double r)
    : p_max(std::move(pm)), r_max(std::move(rm)), D(d), R(r) {
  check_length(r_max.size(), p_max.size(), "r_max");
  if (!std::isfinite(D) || !std::isfinite(R)) throw ValidationError("D and R must be finite");
  for (std::size_t g = 0; g < p_max.size(); ++g) {
    if (!(p_max[g] >= 0.0) || !std::isfinite(p_max[g])) {
      throw ValidationError("p_max must be finite and >= 0 at generator " + std::to_string(g));
    }
    if (!(r_max[g] >= 0.0) || r_max[g] > p_max[g]) {
      throw ValidationError("r_max outside [0, p_max] at generator " + std::to_string(g));
    }
  }
  p_max_total = std::accumulate(p_max.begin(), p_max.end(), 0.0);
  r_max_total = std::accumulate(r_max.begin(), r_max.end(), 0.0);
}

RepairContext::RepairContext(const EDInstance& inst)
    : RepairContext(inst.p_max, inst.r_max, inst.D, inst.R) {}

BalanceResult power_balance_repair(std::span<const double> p, const RepairContext& ctx) {
  check_in_box(p, ctx);
  BalanceResult out;
  BalanceHandle& h = out.handle;
  h.p.assign(p.begin(), p.end());
  h.p_max = ctx.p_max;
  h.D = ctx.D;
  h.p_max_total = ctx.p_max_total;
  h.total = std::accumulate(p.begin(), p.end(), 0.0);
  out.p.resize(p.size());

  if (ctx.D <= 0.0) {
    h.branch = BalanceBranch::kAllZero;
    return out;
  }
  if (ctx.D >= ctx.p_max_total) {
    h.branch = BalanceBranch::kAllMax;
    out.p = ctx.p_max;
    return out;
  }
  if (h.total < ctx.D) {
    h.branch = BalanceBranch::kShortage;
    h.eta = std::clamp((ctx.D - h.total) / (ctx.p_max_total - h.total), 0.0, 1.0);
    for (std::size_t g = 0; g < p.size(); ++g) {
      out.p[g] = std::min(ctx.p_max[g], p[g] + h.eta * (ctx.p_max[g] - p[g]));
    }
  } else {
    h.branch = BalanceBranch::kSurplus;
    const double keep = ctx.D / h.total;
    h.eta = std::clamp(1.0 - keep, 0.0, 1.0);
    for (std::size_t g = 0; g < p.size(); ++g) out.p[g] = keep * p[g];
  }
  return out;
}

std::vector<double> power_balance_vjp(const BalanceHandle& h, std::span<const double> u) {
  check_length(u.size(), h.p.size(), "cotangent");
  const std::size_t n = u.size();
  std::vector<double> v(n, 0.0);
  switch (h.branch) {
    case BalanceBranch::kAllZero:
    case BalanceBranch::kAllMax:
      return v;
    case BalanceBranch::kShortage: {
      const double gap = h.p_max_total - h.total;
      double u_headroom = 0.0;
      for (std::size_t g = 0; g < n; ++g) u_headroom += u[g] * (h.p_max[g] - h.p[g]);
      const double deta = (h.D - h.p_max_total) / (gap * gap);
      for (std::size_t g = 0; g < n; ++g) v[g] = (1.0 - h.eta) * u[g] + u_headroom * deta;
      return v;
    }
    case BalanceBranch::kSurplus: {
      const double keep = h.D / h.total;
      double up = 0.0;
      for (std::size_t g = 0; g < n; ++g) up += u[g] * h.p[g];
      const double coupling = h.D / (h.total * h.total) * up;
      for (std::size_t g = 0; g < n; ++g) v[g] = keep * u[g] - coupling;
      return v;
    }
  }
  return v;
}

void apply_power_balance_repair(std::span<double> p, const RepairContext& ctx) {
  const double D = ctx.D;
  if (D <= 0.0) {
    std::fill(p.begin(), p.end(), 0.0);
    return;
  }
  if (D >= ctx.p_max_total) {
    std::copy(ctx.p_max.begin(), ctx.p_max.end(), p.begin());
    return;
  }
  const double total = sum4(p);
  const double* pm = ctx.p_max.data();
  const std::size_t n = p.size();
  if (total < D) {
    const double eta = std::clamp((D - total) / (ctx.p_max_total - total), 0.0, 1.0);
    for (std::size_t g = 0; g < n; ++g) p[g] = std::min(pm[g], p[g] + eta * (pm[g] - p[g]));
  } else {
    const double keep = D / total;
    for (std::size_t g = 0; g < n; ++g) p[g] *= keep;
  }
}

std::vector<double> generalized_simplex_repair(std::span<const double> x, std::span<const double> l,
                                               std::span<const double> u, std::span<const double> a,
                                               double b) {
  const std::size_t n = x.size();
  check_length(l.size(), n, "l");
  check_length(u.size(), n, "u");
  check_length(a.size(), n, "a");
  std::vector<double> hi(n), lo(n);
  double s = 0.0, s_hi = 0.0, s_lo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(l[i] <= u[i])) throw ContractError("l > u at coordinate " + std::to_string(i));
    if (!(x[i] >= l[i] - kBoxTol && x[i] <= u[i] + kBoxTol)) {
      throw ContractError("x outside [l, u] at coordinate " + std::to_string(i));
    }
    hi[i] = a[i] > 0.0 ? u[i] : a[i] < 0.0 ? l[i] : x[i];
    lo[i] = a[i] > 0.0 ? l[i] : a[i] < 0.0 ? u[i] : x[i];
    s += a[i] * x[i];
    s_hi += a[i] * hi[i];
    s_lo += a[i] * lo[i];
  }
  if (b >= s_hi) return hi;
  if (b <= s_lo) return lo;
  const bool shortage = s < b;
  const std::vector<double>& corner = shortage ? hi : lo;
  const double eta = std::clamp(shortage ? (b - s) / (s_hi - s) : (s - b) / (s - s_lo), 0.0, 1.0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = move_toward(x[i], corner[i], eta);
  return y;
}

std::vector<double> recover_reserves(std::span<const double> p, const RepairContext& ctx) {
  check_length(p.size(), ctx.size(), "dispatch");
  std::vector<double> r(p.size());
  for (std::size_t g = 0; g < p.size(); ++g) r[g] = std::min(ctx.r_max[g], ctx.p_max[g] - p[g]);
  return r;
}

ReserveResult reserve_repair(std::span<const double> p, const RepairContext& ctx) {
  check_balanced(p, ctx);
  const std::size_t n = p.size();
  const ReserveStep s = reserve_step(p, ctx);
  ReserveResult out;
  ReserveHandle& h = out.handle;
  h.branch = s.branch;
  h.delta = s.delta;
  h.delta_up = s.delta_up;
  h.delta_down = s.delta_down;
  h.alpha_up = s.alpha_up;
  h.alpha_down = s.alpha_down;
  h.p.assign(p.begin(), p.end());
  h.target.resize(n);
  h.in_up.resize(n);
  out.p.resize(n);
  for (std::size_t g = 0; g < n; ++g) {
    const double t = ctx.p_max[g] - ctx.r_max[g];
    h.target[g] = t;
    h.in_up[g] = p[g] <= t ? 1 : 0;
    out.p[g] = s.branch == ReserveBranch::kNone
                   ? p[g]
                   : move_toward(p[g], t, h.in_up[g] ? s.alpha_up : s.alpha_down);
  }
  return out;
}

std::vector<double> reserve_repair_vjp(const ReserveHandle& h, std::span<const double> u) {
  check_length(u.size(), h.p.size(), "cotangent");
  const std::size_t n = u.size();
  if (h.branch == ReserveBranch::kNone) return {u.begin(), u.end()};

  // p~_g = p_g + alpha_grp(g) (t_g - p_g); alpha_up = Delta / Delta_up,
  // alpha_down = Delta / Delta_down.
  double a_up = 0.0, a_down = 0.0;
  for (std::size_t g = 0; g < n; ++g) {
    const double w = u[g] * (h.target[g] - h.p[g]);
    if (h.in_up[g]) {
      a_up += w;
    } else {
      a_down += w;
    }
  }
  // d Delta / d p_g for each group.
  double ddelta_up_member = 0.0, ddelta_down_member = 0.0;
  switch (h.branch) {
    case ReserveBranch::kRequirement: ddelta_down_member = 1.0; break;
    case ReserveBranch::kUp: ddelta_up_member = -1.0; break;
    case ReserveBranch::kDown: ddelta_down_member = 1.0; break;
    case ReserveBranch::kNone: break;
  }
  const bool up_live = h.delta_up > 0.0 && h.alpha_up < 1.0;
  const bool down_live = h.delta_down > 0.0 && h.alpha_down < 1.0;
  const double inv_up2 = up_live ? 1.0 / (h.delta_up * h.delta_up) : 0.0;
  const double inv_down2 = down_live ? 1.0 / (h.delta_down * h.delta_down) : 0.0;

  std::vector<double> v(n);
  for (std::size_t g = 0; g < n; ++g) {
    const bool up = h.in_up[g] != 0;
    const double dd = up ? ddelta_up_member : ddelta_down_member;
    const double dd_up = up ? -1.0 : 0.0;
    const double dd_down = up ? 0.0 : 1.0;
    double dalpha_up = 0.0, dalpha_down = 0.0;
    if (up_live) dalpha_up = (dd * h.delta_up - h.delta * dd_up) * inv_up2;
    if (down_live) dalpha_down = (dd * h.delta_down - h.delta * dd_down) * inv_down2;
    const double alpha = up ? h.alpha_up : h.alpha_down;
    v[g] = (1.0 - alpha) * u[g] + a_up * dalpha_up + a_down * dalpha_down;
  }
  return v;
}

void apply_reserve_repair(std::span<double> p, const RepairContext& ctx) {
  const ReserveStep s = reserve_step(p, ctx);
  if (s.branch == ReserveBranch::kNone) return;
  for (std::size_t g = 0; g < p.size(); ++g) {
    const double t = ctx.p_max[g] - ctx.r_max[g];
    p[g] = move_toward(p[g], t, p[g] <= t ? s.alpha_up : s.alpha_down);
  }
}

FeasibilityCertificate feasibility_certificate(const RepairContext& ctx) {
  FeasibilityCertificate cert;
  if (ctx.D < 0.0) {
    cert.witness = "D < 0";
  } else if (ctx.D > ctx.p_max_total) {
    cert.witness = "D > sum p_max";
  } else if (ctx.p_max_total - ctx.D < ctx.R) {
    cert.witness = "sum p_max - D < R";
  } else if (ctx.r_max_total < ctx.R) {
    cert.witness = "sum r_max < R";
  }
  cert.feasible = cert.witness.empty();
  const std::vector<double> zero(ctx.size(), 0.0);
  std::vector<double> p = power_balance_repair(zero, ctx).p;
  apply_reserve_repair(p, ctx);
  cert.reserves = recover_reserves(p, ctx);
  cert.dispatch = std::move(p);
  return cert;
}

}  // namespace e2elr
