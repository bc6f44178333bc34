#pragma once

// Instance datasets stored as JSON Lines, one instance per line:
//   {"d": [...], "R": 0.5, "solution": {"p": [...], "r": [...], "objective": 123.4}}
// The solution block is optional.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace e2elr {

struct LabeledSolution {
  std::vector<double> p;
  std::vector<double> r;
  double objective = 0.0;

  friend bool operator==(const LabeledSolution&, const LabeledSolution&) = default;
};

struct Sample {
  std::vector<double> d;
  double R = 0.0;
  std::optional<LabeledSolution> solution;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetSplits {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

std::string sample_to_json(const Sample& sample);
Sample sample_from_json(const std::string& line);

// Throws ParseError with the 1-based line number on malformed input.
std::vector<Sample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);

// Reads train/val/test.jsonl from a dataset directory; missing files give
// empty splits.
DatasetSplits read_dataset(const std::filesystem::path& dir);

}  // namespace e2elr
