#pragma once

// Transmission network model: MATPOWER ingestion, canonical JSON snapshots,
// PTDF construction and the zero-minimum-output normalization.
//
// Conventions
//   * All power quantities are per-unit on `base_mva`.
//   * Branch flow is positive from `from_bus` to `to_bus`.
//   * PTDF entry (e, i) is the flow on branch e caused by a unit injection at
//     bus i that is withdrawn at the slack bus. The slack column is zero.
//   * Generator costs keep MATPOWER units: cost_linear in $/MWh,
//     cost_quad in $/MW^2h, cost_const in $/h.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "e2elr/matrix.hpp"

namespace e2elr {

struct Bus {
  int id = 0;
  double demand_pu = 0.0;

  friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double reactance_pu = 0.0;
  double flow_min_pu = 0.0;  // -inf when unconstrained
  double flow_max_pu = 0.0;  // +inf when unconstrained
  bool in_service = true;

  friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
  int bus = 0;
  double p_min_pu = 0.0;
  double p_max_pu = 0.0;
  double r_max_pu = 0.0;
  double cost_linear = 0.0;
  double cost_const = 0.0;
  double cost_quad = 0.0;

  friend bool operator==(const Generator&, const Generator&) = default;
};

struct SystemCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  int slack_bus = 0;
  DenseMatrix ptdf;  // |E| x |N|; empty until compute_ptdf

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_branches() const { return branches.size(); }
  std::size_t num_generators() const { return generators.size(); }

  // Position of bus `id` in `buses`; throws ValidationError if absent.
  std::size_t bus_index(int id) const;

  std::vector<double> demand() const;
  std::vector<double> p_max() const;
  std::vector<double> r_max() const;

  friend bool operator==(const SystemCase&, const SystemCase&) = default;
};

// Structural checks shared by every loader. Throws ValidationError.
void validate_case(const SystemCase& system);

// Parses the bus/branch/gen/gencost subset of a MATPOWER case file.
// Out-of-service branches and generators are dropped, quadratic and
// constant cost terms are kept in the struct but noted in `log`.
SystemCase parse_case(std::string_view text, std::vector<std::string>* log = nullptr);

// Writes a MATPOWER case that parse_case reads back to an equal SystemCase.
std::string serialize_case(const SystemCase& system);

// Canonical JSON snapshot (no PTDF). Unbounded flow limits are `null`.
std::string case_to_json(const SystemCase& system);
SystemCase case_from_json(std::string_view json);

// Loads a `.json` snapshot or a MATPOWER `.m` file, chosen by extension.
SystemCase load_case(const std::filesystem::path& path,
                     std::vector<std::string>* log = nullptr);

// Hex-encoded SHA-256 of the canonical snapshot.
std::string case_sha256(const SystemCase& system);

DenseMatrix compute_ptdf(const SystemCase& system, int slack_bus);
inline DenseMatrix compute_ptdf(const SystemCase& system) {
  return compute_ptdf(system, system.slack_bus);
}

// Flows Phi * injection for a bus injection vector.
std::vector<double> ptdf_flows(const DenseMatrix& ptdf, const std::vector<double>& injection);

struct NormalizedCase {
  SystemCase system;
  std::vector<double> generator_offset;  // original p_min per generator
  std::vector<double> demand_offset;     // sum of p_min per bus
  double cost_offset = 0.0;              // sum c_g * p_min_g, in $/h
  bool dropped_cost_terms = false;       // constant or quadratic terms removed
};

// Shifts p' = p - p_min so every generator has p_min = 0, lowers nodal demand
// by the same amounts, caps r_max at the new p_max and drops the constant and
// quadratic cost terms.
NormalizedCase normalize_case(const SystemCase& system);

struct SyntheticCaseOptions {
  int num_buses = 30;
  int num_generators = 20;
  std::uint64_t seed = 1;
  double base_mva = 100.0;
  double load_factor = 0.6;       // reference demand / total capacity
  double congested_fraction = 0.15;  // share of branches given a binding limit
};

// Meshed test network: a ring plus random chords, generators with spread-out
// linear costs, and thermal limits tightened on the most loaded branches so
// that some are binding at the reference load.
SystemCase make_synthetic_case(const SyntheticCaseOptions& options);

}  // namespace e2elr
