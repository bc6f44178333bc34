#include "e2elr/grid_model.hpp"

#include <openssl/evp.h>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "e2elr/error.hpp"

namespace e2elr {

using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json limit_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double limit_from_json(const json& j, double unbounded) {
  return j.is_null() ? unbounded : j.get<double>();
}

}  // namespace

std::size_t SystemCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw ValidationError("unknown bus id " + std::to_string(id));
}

std::vector<double> SystemCase::demand() const {
  std::vector<double> d(buses.size());
  std::transform(buses.begin(), buses.end(), d.begin(),
                 [](const Bus& b) { return b.demand_pu; });
  return d;
}

std::vector<double> SystemCase::p_max() const {
  std::vector<double> v(generators.size());
  std::transform(generators.begin(), generators.end(), v.begin(),
                 [](const Generator& g) { return g.p_max_pu; });
  return v;
}

std::vector<double> SystemCase::r_max() const {
  std::vector<double> v(generators.size());
  std::transform(generators.begin(), generators.end(), v.begin(),
                 [](const Generator& g) { return g.r_max_pu; });
  return v;
}

void validate_case(const SystemCase& system) {
  if (!(system.base_mva > 0.0)) throw ValidationError("base_mva must be positive");
  if (system.buses.empty()) throw ValidationError("case has no buses");

  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < system.buses.size(); ++i) {
    if (!index.emplace(system.buses[i].id, i).second) {
      throw ValidationError("duplicate bus id " + std::to_string(system.buses[i].id));
    }
    if (!std::isfinite(system.buses[i].demand_pu)) {
      throw ValidationError("non-finite demand at bus " + std::to_string(system.buses[i].id));
    }
  }
  if (!index.count(system.slack_bus)) {
    throw ValidationError("slack bus " + std::to_string(system.slack_bus) + " does not exist");
  }
  for (std::size_t e = 0; e < system.branches.size(); ++e) {
    const Branch& br = system.branches[e];
    for (int end : {br.from_bus, br.to_bus}) {
      if (!index.count(end)) {
        throw ValidationError("branch " + std::to_string(e + 1) + " references unknown bus " +
                              std::to_string(end));
      }
    }
    if (br.in_service && br.reactance_pu == 0.0) {
      throw ValidationError("branch " + std::to_string(e + 1) + " has zero reactance");
    }
    if (br.flow_min_pu > br.flow_max_pu) {
      throw ValidationError("branch " + std::to_string(e + 1) + " has flow_min > flow_max");
    }
  }
  for (std::size_t g = 0; g < system.generators.size(); ++g) {
    const Generator& gen = system.generators[g];
    if (!index.count(gen.bus)) {
      throw ValidationError("generator " + std::to_string(g + 1) + " references unknown bus " +
                            std::to_string(gen.bus));
    }
    if (!std::isfinite(gen.p_max_pu) || !std::isfinite(gen.p_min_pu) ||
        !std::isfinite(gen.cost_linear)) {
      throw ValidationError("generator " + std::to_string(g + 1) + " has non-finite data");
    }
  }
}

std::string case_to_json(const SystemCase& system) {
  json j;
  j["base_mva"] = system.base_mva;
  json buses = json::array();
  for (const Bus& b : system.buses) buses.push_back({{"id", b.id}, {"demand_pu", b.demand_pu}});
  j["buses"] = std::move(buses);
  json branches = json::array();
  for (const Branch& br : system.branches) {
    branches.push_back({{"from_bus", br.from_bus},
                        {"to_bus", br.to_bus},
                        {"reactance_pu", br.reactance_pu},
                        {"flow_min_pu", limit_to_json(br.flow_min_pu)},
                        {"flow_max_pu", limit_to_json(br.flow_max_pu)},
                        {"in_service", br.in_service}});
  }
  j["branches"] = std::move(branches);
  json gens = json::array();
  for (const Generator& g : system.generators) {
    gens.push_back({{"bus", g.bus},
                    {"p_min_pu", g.p_min_pu},
                    {"p_max_pu", g.p_max_pu},
                    {"r_max_pu", g.r_max_pu},
                    {"cost_linear", g.cost_linear},
                    {"cost_const", g.cost_const},
                    {"cost_quad", g.cost_quad}});
  }
  j["generators"] = std::move(gens);
  j["slack_bus"] = system.slack_bus;
  return j.dump(1);
}

SystemCase case_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("case snapshot: ") + e.what(), 0);
  }
  SystemCase system;
  try {
    system.base_mva = j.at("base_mva").get<double>();
    for (const json& b : j.at("buses")) {
      system.buses.push_back({b.at("id").get<int>(), b.at("demand_pu").get<double>()});
    }
    for (const json& br : j.at("branches")) {
      Branch branch;
      branch.from_bus = br.at("from_bus").get<int>();
      branch.to_bus = br.at("to_bus").get<int>();
      branch.reactance_pu = br.at("reactance_pu").get<double>();
      branch.flow_min_pu = limit_from_json(br.at("flow_min_pu"), -kInf);
      branch.flow_max_pu = limit_from_json(br.at("flow_max_pu"), kInf);
      branch.in_service = br.value("in_service", true);
      system.branches.push_back(branch);
    }
    for (const json& g : j.at("generators")) {
      Generator gen;
      gen.bus = g.at("bus").get<int>();
      gen.p_min_pu = g.at("p_min_pu").get<double>();
      gen.p_max_pu = g.at("p_max_pu").get<double>();
      gen.r_max_pu = g.at("r_max_pu").get<double>();
      gen.cost_linear = g.at("cost_linear").get<double>();
      gen.cost_const = g.value("cost_const", 0.0);
      gen.cost_quad = g.value("cost_quad", 0.0);
      system.generators.push_back(gen);
    }
    system.slack_bus = j.at("slack_bus").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("case snapshot: ") + e.what(), 0);
  }
  validate_case(system);
  return system;
}

SystemCase load_case(const std::filesystem::path& path, std::vector<std::string>* log) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open case file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") return case_from_json(buffer.str());
  return parse_case(buffer.str(), log);
}

std::string case_sha256(const SystemCase& system) {
  const std::string text = case_to_json(system);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

DenseMatrix compute_ptdf(const SystemCase& system, int slack_bus) {
  const std::size_t n = system.num_buses();
  const std::size_t slack = system.bus_index(slack_bus);

  std::vector<std::size_t> from(system.num_branches()), to(system.num_branches());
  for (std::size_t e = 0; e < system.num_branches(); ++e) {
    from[e] = system.bus_index(system.branches[e].from_bus);
    to[e] = system.bus_index(system.branches[e].to_bus);
  }

  // Connectivity over in-service branches.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t e = 0; e < system.num_branches(); ++e) {
    if (system.branches[e].in_service) parent[find(from[e])] = find(to[e]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (find(i) != find(slack)) {
      throw NumericalError("network is disconnected: bus " + std::to_string(system.buses[i].id) +
                           " is not connected to the slack bus");
    }
  }

  // Reduced susceptance matrix: bus index i maps to row i, minus one past slack.
  auto reduced = [slack](std::size_t i) { return static_cast<int>(i < slack ? i : i - 1); };
  const int m = static_cast<int>(n) - 1;
  DenseMatrix ptdf(system.num_branches(), n, 0.0);
  if (m == 0) return ptdf;

  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t e = 0; e < system.num_branches(); ++e) {
    if (!system.branches[e].in_service) continue;
    const double b = 1.0 / system.branches[e].reactance_pu;
    const std::size_t f = from[e], t = to[e];
    if (f != slack) triplets.emplace_back(reduced(f), reduced(f), b);
    if (t != slack) triplets.emplace_back(reduced(t), reduced(t), b);
    if (f != slack && t != slack) {
      triplets.emplace_back(reduced(f), reduced(t), -b);
      triplets.emplace_back(reduced(t), reduced(f), -b);
    }
  }
  Eigen::SparseMatrix<double> bred(m, m);
  bred.setFromTriplets(triplets.begin(), triplets.end());
  bred.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(bred);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("reduced susceptance matrix is singular");
  }

  // B is symmetric, so row e of the PTDF is B^{-1}(e_from - e_to) / x_e.
  Eigen::VectorXd rhs(m);
  for (std::size_t e = 0; e < system.num_branches(); ++e) {
    if (!system.branches[e].in_service) continue;
    rhs.setZero();
    if (from[e] != slack) rhs(reduced(from[e])) += 1.0;
    if (to[e] != slack) rhs(reduced(to[e])) -= 1.0;
    const Eigen::VectorXd y = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !y.allFinite()) {
      throw NumericalError("PTDF solve failed for branch " + std::to_string(e + 1));
    }
    const double inv_x = 1.0 / system.branches[e].reactance_pu;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != slack) ptdf(e, i) = y(reduced(i)) * inv_x;
    }
  }
  return ptdf;
}

std::vector<double> ptdf_flows(const DenseMatrix& ptdf, const std::vector<double>& injection) {
  if (injection.size() != ptdf.cols()) throw ContractError("injection size does not match PTDF");
  std::vector<double> flows(ptdf.rows(), 0.0);
  for (std::size_t e = 0; e < ptdf.rows(); ++e) {
    const auto row = ptdf.row(e);
    flows[e] = std::inner_product(row.begin(), row.end(), injection.begin(), 0.0);
  }
  return flows;
}

NormalizedCase normalize_case(const SystemCase& system) {
  NormalizedCase out;
  out.system = system;
  out.generator_offset.assign(system.num_generators(), 0.0);
  out.demand_offset.assign(system.num_buses(), 0.0);
  for (std::size_t g = 0; g < system.num_generators(); ++g) {
    Generator& gen = out.system.generators[g];
    if (gen.p_min_pu > gen.p_max_pu) {
      throw ValidationError("generator " + std::to_string(g + 1) + " has p_min > p_max");
    }
    const double shift = gen.p_min_pu;
    out.generator_offset[g] = shift;
    out.demand_offset[system.bus_index(gen.bus)] += shift;
    out.cost_offset += gen.cost_linear * shift * system.base_mva;
    gen.p_min_pu = 0.0;
    gen.p_max_pu -= shift;
    gen.r_max_pu = std::clamp(gen.r_max_pu, 0.0, gen.p_max_pu);
    if (gen.cost_const != 0.0 || gen.cost_quad != 0.0) out.dropped_cost_terms = true;
    gen.cost_const = 0.0;
    gen.cost_quad = 0.0;
  }
  for (std::size_t i = 0; i < system.num_buses(); ++i) {
    out.system.buses[i].demand_pu -= out.demand_offset[i];
  }
  return out;
}

}  // namespace e2elr
