// MATPOWER case-file subset: mpc.baseMVA, mpc.bus, mpc.branch, mpc.gen,
// mpc.gencost. Everything else in the file is skipped.
//
// Column layout (1-based, MATPOWER manual):
//   bus:     1 BUS_I  2 BUS_TYPE  3 PD
//   branch:  1 F_BUS  2 T_BUS  4 BR_X  6 RATE_A  11 BR_STATUS
//   gen:     1 GEN_BUS  8 GEN_STATUS  9 PMAX  10 PMIN  18 RAMP_10
//   gencost: 1 MODEL  4 NCOST  5.. coefficients / breakpoints
//
// RAMP_10, when present and positive, is read as the reserve capacity r_max;
// otherwise r_max = p_max. RATE_A = 0 means an unconstrained branch.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "e2elr/error.hpp"
#include "e2elr/grid_model.hpp"

namespace e2elr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Row {
  std::vector<double> values;
  std::size_t line = 0;
};

struct Matrix {
  std::vector<Row> rows;
  std::size_t line = 0;
};

double parse_number(std::string_view token, std::size_t line) {
  std::string s(token);
  if (s == "Inf" || s == "inf") return kInf;
  if (s == "-Inf" || s == "-inf") return -kInf;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("malformed numeric field '" + s + "'", line);
  }
  return v;
}

void split_row(std::string_view text, std::size_t line, Matrix& matrix) {
  Row row;
  row.line = line;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',' ||
                               text[i] == '\r')) {
      ++i;
    }
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != ',' &&
           text[j] != '\r') {
      ++j;
    }
    row.values.push_back(parse_number(text.substr(i, j - i), line));
    i = j;
  }
  if (!row.values.empty()) matrix.rows.push_back(std::move(row));
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits the file into named matrices and scalar assignments.
void scan(std::string_view text, std::map<std::string, Matrix>& matrices,
          std::map<std::string, std::pair<double, std::size_t>>& scalars) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  Matrix* open = nullptr;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);

    if (!open) {
      line = trim(line);
      if (!line.starts_with("mpc.")) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string name(trim(line.substr(4, eq - 4)));
      std::string_view rhs = trim(line.substr(eq + 1));
      if (rhs.starts_with('[')) {
        Matrix& m = matrices[name];
        m = Matrix{};
        m.line = line_no;
        open = &m;
        line = rhs.substr(1);
      } else {
        if (rhs.ends_with(';')) rhs = trim(rhs.substr(0, rhs.size() - 1));
        if (!rhs.empty() && (std::isdigit(static_cast<unsigned char>(rhs[0])) || rhs[0] == '-' ||
                             rhs[0] == '.')) {
          scalars[name] = {parse_number(rhs, line_no), line_no};
        }
        continue;
      }
    }

    // Inside a matrix body: rows end at ';' or newline, body ends at ']'.
    bool closed = false;
    if (const auto close = line.find(']'); close != std::string_view::npos) {
      line = line.substr(0, close);
      closed = true;
    }
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t semi = line.find(';', start);
      if (semi == std::string_view::npos) semi = line.size();
      split_row(line.substr(start, semi - start), line_no, *open);
      start = semi + 1;
    }
    if (closed) open = nullptr;
  }
  if (open) throw ParseError("unterminated matrix", open->line);
}

const Matrix& require(const std::map<std::string, Matrix>& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw ParseError("missing mpc." + name, 0);
  return it->second;
}

void require_columns(const Row& row, std::size_t n, const std::string& what) {
  if (row.values.size() < n) {
    throw ParseError(what + " row has " + std::to_string(row.values.size()) +
                         " columns, expected at least " + std::to_string(n),
                     row.line);
  }
}

int as_int(double v, std::size_t line) {
  if (v != std::floor(v)) throw ParseError("expected an integer id, got " + std::to_string(v), line);
  return static_cast<int>(v);
}

// Decimal text for `pu * base` that reads back to exactly `pu` after the
// parser divides by `base`. Searches a few ulps around the product.
std::string mw_text(double pu, double base) {
  if (!std::isfinite(pu)) return "0";
  char buf[64];
  double lo = pu * base, hi = lo;
  for (int k = 0; k < 16; ++k) {
    for (double candidate : {lo, hi}) {
      if (candidate / base == pu) {
        std::snprintf(buf, sizeof buf, "%.17g", candidate);
        return buf;
      }
    }
    lo = std::nextafter(lo, -kInf);
    hi = std::nextafter(hi, kInf);
  }
  std::snprintf(buf, sizeof buf, "%.17g", pu * base);
  return buf;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SystemCase parse_case(std::string_view text, std::vector<std::string>* log) {
  std::map<std::string, Matrix> matrices;
  std::map<std::string, std::pair<double, std::size_t>> scalars;
  scan(text, matrices, scalars);

  SystemCase system;
  auto base = scalars.find("baseMVA");
  if (base == scalars.end()) throw ParseError("missing mpc.baseMVA", 0);
  system.base_mva = base->second.first;
  if (!(system.base_mva > 0.0)) throw ParseError("baseMVA must be positive", base->second.second);

  const Matrix& bus = require(matrices, "bus");
  const Matrix& branch = require(matrices, "branch");
  const Matrix& gen = require(matrices, "gen");
  const Matrix& gencost = require(matrices, "gencost");

  bool have_slack = false;
  std::vector<int> isolated;
  for (const Row& row : bus.rows) {
    require_columns(row, 3, "bus");
    const int id = as_int(row.values[0], row.line);
    const int type = as_int(row.values[1], row.line);
    if (type == 4) {
      isolated.push_back(id);
      continue;
    }
    system.buses.push_back({id, row.values[2] / system.base_mva});
    if (type == 3 && !have_slack) {
      system.slack_bus = id;
      have_slack = true;
    }
  }
  if (system.buses.empty()) throw ParseError("mpc.bus is empty", bus.line);
  if (!have_slack) system.slack_bus = system.buses.front().id;
  auto is_isolated = [&](int id) {
    return std::find(isolated.begin(), isolated.end(), id) != isolated.end();
  };

  std::size_t dropped_branches = 0;
  for (const Row& row : branch.rows) {
    require_columns(row, 11, "branch");
    Branch br;
    br.from_bus = as_int(row.values[0], row.line);
    br.to_bus = as_int(row.values[1], row.line);
    br.reactance_pu = row.values[3];
    const double rate = row.values[5];
    br.flow_max_pu = rate > 0.0 ? rate / system.base_mva : kInf;
    br.flow_min_pu = -br.flow_max_pu;
    br.in_service = row.values[10] != 0.0;
    if (!br.in_service || is_isolated(br.from_bus) || is_isolated(br.to_bus)) {
      ++dropped_branches;
      continue;
    }
    if (br.reactance_pu == 0.0) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": in-service branch has zero reactance");
    }
    system.branches.push_back(br);
  }

  if (gencost.rows.size() < gen.rows.size()) {
    throw ParseError("mpc.gencost has fewer rows than mpc.gen", gencost.line);
  }
  std::size_t dropped_gens = 0;
  bool has_quadratic = false, has_const = false, has_pwl = false;
  for (std::size_t g = 0; g < gen.rows.size(); ++g) {
    const Row& row = gen.rows[g];
    const Row& cost = gencost.rows[g];
    require_columns(row, 10, "gen");
    require_columns(cost, 4, "gencost");
    if (row.values[7] == 0.0 || is_isolated(as_int(row.values[0], row.line))) {
      ++dropped_gens;
      continue;
    }
    Generator unit;
    unit.bus = as_int(row.values[0], row.line);
    unit.p_max_pu = row.values[8] / system.base_mva;
    unit.p_min_pu = row.values[9] / system.base_mva;
    unit.r_max_pu = (row.values.size() > 17 && row.values[17] > 0.0)
                        ? row.values[17] / system.base_mva
                        : unit.p_max_pu;

    const int model = as_int(cost.values[0], cost.line);
    const int ncost = as_int(cost.values[3], cost.line);
    if (model == 2) {
      require_columns(cost, 4 + static_cast<std::size_t>(ncost), "gencost");
      const double* c = cost.values.data() + 4;  // highest order first
      if (ncost >= 1) unit.cost_const = c[ncost - 1];
      if (ncost >= 2) unit.cost_linear = c[ncost - 2];
      if (ncost >= 3) unit.cost_quad = c[ncost - 3];
    } else if (model == 1) {
      require_columns(cost, 4 + 2 * static_cast<std::size_t>(ncost), "gencost");
      const double* c = cost.values.data() + 4;
      if (ncost >= 2) {
        const double x0 = c[0], y0 = c[1], x1 = c[2 * ncost - 2], y1 = c[2 * ncost - 1];
        unit.cost_linear = (x1 != x0) ? (y1 - y0) / (x1 - x0) : 0.0;
        unit.cost_const = y0 - unit.cost_linear * x0;
      }
      has_pwl = true;
    } else {
      throw ParseError("unsupported gencost model " + std::to_string(model), cost.line);
    }
    has_quadratic |= unit.cost_quad != 0.0;
    has_const |= unit.cost_const != 0.0;
    system.generators.push_back(unit);
  }

  if (log) {
    if (dropped_branches) {
      log->push_back("dropped " + std::to_string(dropped_branches) + " out-of-service branches");
    }
    if (dropped_gens) {
      log->push_back("dropped " + std::to_string(dropped_gens) + " out-of-service generators");
    }
    if (has_quadratic) log->push_back("quadratic cost terms are ignored by the LP objective");
    if (has_const) log->push_back("constant cost terms are ignored by the LP objective");
    if (has_pwl) log->push_back("piecewise-linear costs replaced by their end-to-end slope");
  }

  validate_case(system);
  return system;
}

std::string serialize_case(const SystemCase& system) {
  std::ostringstream out;
  out << "function mpc = e2elr_case\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << num(system.base_mva) << ";\n\n";

  out << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  out << "mpc.bus = [\n";
  for (const Bus& b : system.buses) {
    const int type = b.id == system.slack_bus ? 3 : 1;
    out << '\t' << b.id << '\t' << type << '\t' << mw_text(b.demand_pu, system.base_mva)
        << "\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;\n";
  }
  out << "];\n\n";

  out << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin Pc1 Pc2 Qc1min Qc1max "
         "Qc2min Qc2max ramp_agc ramp_10 ramp_30 ramp_q apf\n";
  out << "mpc.gen = [\n";
  for (const Generator& g : system.generators) {
    out << '\t' << g.bus << "\t0\t0\t0\t0\t1\t" << num(system.base_mva) << "\t1\t"
        << mw_text(g.p_max_pu, system.base_mva) << '\t' << mw_text(g.p_min_pu, system.base_mva)
        << "\t0\t0\t0\t0\t0\t0\t0\t" << mw_text(g.r_max_pu, system.base_mva) << "\t0\t0\t0;\n";
  }
  out << "];\n\n";

  out << "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n";
  out << "mpc.branch = [\n";
  for (const Branch& br : system.branches) {
    const std::string rate =
        std::isfinite(br.flow_max_pu) ? mw_text(br.flow_max_pu, system.base_mva) : "0";
    out << '\t' << br.from_bus << '\t' << br.to_bus << "\t0\t" << num(br.reactance_pu) << "\t0\t"
        << rate << '\t' << rate << '\t' << rate << "\t0\t0\t" << (br.in_service ? 1 : 0)
        << "\t-360\t360;\n";
  }
  out << "];\n\n";

  out << "%% 2 startup shutdown n c(n-1) ... c0\n";
  out << "mpc.gencost = [\n";
  for (const Generator& g : system.generators) {
    out << "\t2\t0\t0\t3\t" << num(g.cost_quad) << '\t' << num(g.cost_linear) << '\t'
        << num(g.cost_const) << ";\n";
  }
  out << "];\n";
  return out.str();
}

}  // namespace e2elr
