#pragma once

// Model evaluation and table emission.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "e2elr/dataset.hpp"
#include "e2elr/ed_core.hpp"
#include "e2elr/training.hpp"

namespace e2elr {

struct EvalRecord {
  std::size_t instance = 0;
  std::string model;   // checkpoint label
  std::string arch;
  std::string loss;
  double objective = 0.0;   // penalized objective of the prediction, $/h
  double reference = 0.0;   // Z*
  double gap = 0.0;
  bool feasible = false;
  double balance = 0.0;
  double reserve = 0.0;
  double eco_max = 0.0;
  double dispatch_bounds = 0.0;
  double reserve_bounds = 0.0;
  double max_violation = 0.0;
  double inference_seconds = 0.0;  // batch time divided by batch size

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

std::string record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const std::string& line);
void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

// Scores one prediction against the instance and its reference objective.
EvalRecord score_prediction(const EDInstance& inst, std::span<const double> p, double reference);

struct Tables {
  std::string gap_csv;
  std::string gap_md;
  std::string feasibility_csv;
  std::string feasibility_md;
};

struct ModelSummary {
  std::string model;
  std::string arch;
  std::string loss;
  std::size_t count = 0;
  double gap_sgm = 0.0;        // shifted geometric mean, negative gaps counted as 0
  double gap_mean = 0.0;       // arithmetic mean
  double percent_feasible = 0.0;
  double mean_violation = 0.0; // shifted geometric mean over infeasible predictions; 0 if none
  double max_balance = 0.0;
};

// One summary per model, in first-appearance order.
std::vector<ModelSummary> summarize(const std::vector<EvalRecord>& records);

// Gap and feasibility tables; deterministic functions of the records.
Tables emit_tables(const std::vector<EvalRecord>& records);

struct RepairTiming {
  std::size_t generators = 0;
  bool reserve_mode = false;
  int reps = 0;
  double repair_seconds = 0.0;      // median per call
  double projection_seconds = 0.0;  // median per call
  double speedup() const { return repair_seconds > 0.0 ? projection_seconds / repair_seconds : 0.0; }
};

// Median time of the stand-alone repair layers against the exact projection
// on a synthetic n-generator context whose capacities are resampled from
// `p_max_pool`. 10 warm-up calls precede `reps` timed calls.
RepairTiming time_repair_vs_projection(std::span<const double> p_max_pool, std::size_t n, int reps,
                                       bool reserve_mode, std::uint64_t seed);

std::string timing_table_md(const std::vector<RepairTiming>& rows);
std::string timing_table_csv(const std::vector<RepairTiming>& rows);

struct BenchConfig {
  std::size_t batch_size = 256;
  int timing_reps = 100;
  std::filesystem::path out_dir;
};

struct BenchOutput {
  std::vector<EvalRecord> records;
  Tables tables;
  std::string inference_md;
  std::vector<std::string> skipped;  // models that could not be loaded
};

// Evaluates every checkpoint on `test`. Instances without a solution block
// are solved with solve_reference. Writes records.jsonl and the tables when
// config.out_dir is set.
BenchOutput run_benchmark(const EDNetwork& network, const std::vector<Sample>& test,
                          const std::vector<std::filesystem::path>& models, const BenchConfig& config);

// Median of a sample (the input is copied).
double median(std::vector<double> values);

}  // namespace e2elr
