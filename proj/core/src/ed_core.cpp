#include "e2elr/ed_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace e2elr {

namespace {

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ContractError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                        std::to_string(want));
  }
}

void validate_instance(const EDInstance& inst) {
  const std::size_t g = inst.num_generators();
  check_size(inst.r_max.size(), g, "r_max");
  check_size(inst.c.size(), g, "c");
  check_size(inst.f_min.size(), inst.f_max.size(), "f_min");
  if (inst.gen_ptdf) {
    if (inst.gen_ptdf->rows() != inst.f_max.size() || inst.gen_ptdf->cols() != g) {
      throw ContractError("generator PTDF shape does not match the instance");
    }
    check_size(inst.flow_offset.size(), inst.f_max.size(), "flow_offset");
  }
  for (double v : inst.d) {
    if (!std::isfinite(v)) throw ValidationError("non-finite demand");
  }
  for (std::size_t k = 0; k < g; ++k) {
    if (!(inst.p_max[k] >= 0.0)) throw ValidationError("negative p_max at generator " + std::to_string(k));
    if (!(inst.r_max[k] >= 0.0) || inst.r_max[k] > inst.p_max[k]) {
      throw ValidationError("r_max outside [0, p_max] at generator " + std::to_string(k));
    }
  }
  for (std::size_t e = 0; e < inst.f_max.size(); ++e) {
    if (inst.f_min[e] > 0.0 || inst.f_max[e] < 0.0) {
      throw ValidationError("thermal limits must bracket zero on branch " + std::to_string(e));
    }
  }
  if (!(inst.R >= 0.0) || !std::isfinite(inst.R)) throw ValidationError("reserve requirement must be >= 0");
  const PenaltyPrices& m = inst.prices;
  if (!(m.thermal > 0.0 && m.balance > 0.0 && m.reserve > 0.0)) {
    throw ValidationError("penalty prices must be positive");
  }
}

}  // namespace

EDNetwork::EDNetwork(SystemCase system) : system_(std::move(system)) {
  validate_case(system_);
  for (const Generator& g : system_.generators) {
    if (g.p_min_pu != 0.0) throw ContractError("EDNetwork expects a normalized case (p_min = 0)");
  }
  if (system_.ptdf.empty() && !system_.branches.empty()) system_.ptdf = compute_ptdf(system_);
  auto gen = std::make_shared<DenseMatrix>(system_.num_branches(), system_.num_generators());
  for (std::size_t k = 0; k < system_.num_generators(); ++k) {
    const std::size_t bus = system_.bus_index(system_.generators[k].bus);
    for (std::size_t e = 0; e < system_.num_branches(); ++e) (*gen)(e, k) = system_.ptdf(e, bus);
  }
  gen_ptdf_ = std::move(gen);
}

EDInstance EDNetwork::instance(std::vector<double> d, double R, PenaltyPrices prices) const {
  check_size(d.size(), system_.num_buses(), "demand");
  EDInstance inst;
  inst.D = std::accumulate(d.begin(), d.end(), 0.0);
  inst.R = R;
  inst.p_max = system_.p_max();
  inst.r_max = system_.r_max();
  for (const Generator& g : system_.generators) inst.c.push_back(g.cost_linear);
  for (const Branch& br : system_.branches) {
    inst.f_min.push_back(br.flow_min_pu);
    inst.f_max.push_back(br.flow_max_pu);
  }
  inst.gen_ptdf = gen_ptdf_;
  inst.flow_offset.assign(system_.num_branches(), 0.0);
  for (std::size_t e = 0; e < system_.num_branches(); ++e) {
    const auto row = system_.ptdf.row(e);
    double f = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) f -= row[i] * d[i];
    inst.flow_offset[e] = f;
  }
  inst.d = std::move(d);
  inst.money_scale = system_.base_mva;
  inst.prices = prices;
  validate_instance(inst);
  return inst;
}

EDInstance make_instance(std::vector<double> p_max, std::vector<double> r_max, std::vector<double> c,
                         double D, double R, double money_scale) {
  EDInstance inst;
  inst.d = {D};
  inst.D = D;
  inst.R = R;
  inst.p_max = std::move(p_max);
  inst.r_max = std::move(r_max);
  inst.c = std::move(c);
  inst.money_scale = money_scale;
  validate_instance(inst);
  return inst;
}

double objective_value(const EDInstance& inst, std::span<const double> p) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  if (p.empty()) return 0.0;
  return objective(inst, p);
}

std::vector<double> branch_flows(const EDInstance& inst, std::span<const double> p) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  std::vector<double> flows;
  if (!inst.has_network()) return flows;
  flows.resize(inst.num_branches());
  for (std::size_t e = 0; e < flows.size(); ++e) flows[e] = branch_flow(inst, p, e);
  return flows;
}

std::vector<double> thermal_violations(const EDInstance& inst, std::span<const double> p) {
  std::vector<double> xi = branch_flows(inst, p);
  for (std::size_t e = 0; e < xi.size(); ++e) {
    const double f = xi[e];
    xi[e] = std::max({0.0, f - inst.f_max[e], inst.f_min[e] - f});
  }
  if (xi.empty()) xi.assign(inst.num_branches(), 0.0);
  return xi;
}

double reserve_shortage(const EDInstance& inst, std::span<const double> p) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  if (p.empty()) return std::max(0.0, inst.R);
  return reserve_shortfall(inst, p);
}

double penalized_objective(const EDInstance& inst, std::span<const double> p) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  if (p.empty()) return 0.0;
  return objective(inst, p) + hard_penalty(inst, p);
}

double FeasibilityReport::max_violation() const {
  return std::max({balance, reserve, eco_max, dispatch_bounds, reserve_bounds});
}

FeasibilityReport check_feasibility(const EDInstance& inst, std::span<const double> p,
                                    std::span<const double> r, double tol) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  check_size(r.size(), inst.num_generators(), "reserves");
  FeasibilityReport rep;
  double total_p = 0.0;
  double total_r = 0.0;
  for (std::size_t g = 0; g < p.size(); ++g) {
    total_p += p[g];
    total_r += r[g];
    rep.eco_max = std::max(rep.eco_max, p[g] + r[g] - inst.p_max[g]);
    rep.dispatch_bounds = std::max({rep.dispatch_bounds, -p[g], p[g] - inst.p_max[g]});
    rep.reserve_bounds = std::max({rep.reserve_bounds, -r[g], r[g] - inst.r_max[g]});
  }
  rep.balance = std::abs(total_p - inst.D);
  rep.reserve = std::max(0.0, inst.R - total_r);
  rep.feasible = rep.max_violation() <= tol;
  return rep;
}

std::vector<double> max_reserves(const EDInstance& inst, std::span<const double> p) {
  check_size(p.size(), inst.num_generators(), "dispatch");
  std::vector<double> r(p.size());
  for (std::size_t g = 0; g < p.size(); ++g) {
    r[g] = std::clamp(std::min(inst.r_max[g], inst.p_max[g] - p[g]), 0.0, inst.r_max[g]);
  }
  return r;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

}  // namespace e2elr
