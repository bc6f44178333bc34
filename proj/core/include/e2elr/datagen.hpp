#pragma once

// Instance generation: perturbed loads and reserve requirements.
//
//   d = gamma * eta (elementwise) * d_ref,  gamma ~ U[0.8, 1.2],
//   eta_i lognormal with mean 1 and standard deviation 0.05,
//   r_max = alpha_r * p_max,  alpha_r = min(1, 5 * max(p_max) / sum(p_max)),
//   R ~ U[1, 2] * max(p_max) in ED-R mode, R = 0 otherwise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "e2elr/dataset.hpp"
#include "e2elr/grid_model.hpp"
#include "e2elr/rng.hpp"

namespace e2elr {

struct GenConfig {
  double gamma_min = 0.8;
  double gamma_max = 1.2;
  double noise_sd = 0.05;      // of the lognormal factor itself
  bool reserve_mode = false;   // ED-R when true
  double reserve_min = 1.0;    // R range as multiples of max(p_max)
  double reserve_max = 2.0;
  std::size_t count = 50000;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  bool label = false;          // solve every instance with solve_reference
  std::uint64_t seed = 0;
  std::size_t max_attempts_per_instance = 100;
  unsigned threads = 0;        // labeling workers; 0 = hardware concurrency
};

std::vector<double> perturb_loads(std::span<const double> d_ref, const GenConfig& cfg, Rng& rng);

// alpha_r = min(1, 5 * max(p_max) / sum(p_max)). Throws if sum(p_max) <= 0.
double reserve_fraction(std::span<const double> p_max);
std::vector<double> reserve_capacity(std::span<const double> p_max);

double sample_reserve_requirement(std::span<const double> p_max, const GenConfig& cfg, Rng& rng);

// Sizes of the train/val/test splits for `count` instances.
std::array<std::size_t, 3> split_sizes(std::size_t count, const std::array<double, 3>& fractions);

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::string case_sha256;
  std::array<std::size_t, 3> counts{};
  std::size_t rejected = 0;
  std::size_t solver_invocations = 0;
};

// The case used for generation: p_min shifted out and r_max = alpha_r * p_max
// (alpha_r from the original capacities, capped at the shifted p_max).
NormalizedCase prepare_case(const SystemCase& system);

struct GeneratedDataset {
  SystemCase system;  // normalized snapshot the instances refer to
  DatasetSplits splits;
  DatasetManifest manifest;
};

GeneratedDataset generate_dataset(const SystemCase& system, const GenConfig& cfg);

// Writes case.json, train/val/test.jsonl and manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const GeneratedDataset& data, const GenConfig& cfg);

DatasetManifest build_dataset(const SystemCase& system, const GenConfig& cfg, const std::filesystem::path& dir);

}  // namespace e2elr
