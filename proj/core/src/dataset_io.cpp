#include <fstream>
#include <nlohmann/json.hpp>

#include "e2elr/dataset.hpp"
#include "e2elr/error.hpp"

namespace e2elr {

using nlohmann::json;

std::string sample_to_json(const Sample& s) {
  json j;
  j["d"] = s.d;
  j["R"] = s.R;
  if (s.solution) {
    j["solution"] = {{"p", s.solution->p}, {"r", s.solution->r}, {"objective", s.solution->objective}};
  }
  return j.dump();
}

Sample sample_from_json(const std::string& line) {
  const json j = json::parse(line);
  Sample s;
  s.d = j.at("d").get<std::vector<double>>();
  s.R = j.value("R", 0.0);
  if (j.contains("solution") && !j["solution"].is_null()) {
    const json& sol = j["solution"];
    LabeledSolution ls;
    ls.p = sol.at("p").get<std::vector<double>>();
    ls.r = sol.value("r", std::vector<double>{});
    ls.objective = sol.value("objective", 0.0);
    s.solution = std::move(ls);
  }
  return s;
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(line));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), number);
    }
  }
  return out;
}

void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const Sample& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

DatasetSplits read_dataset(const std::filesystem::path& dir) {
  DatasetSplits splits;
  auto load = [&](const char* name, std::vector<Sample>& into) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) into = read_samples(p);
  };
  load("train.jsonl", splits.train);
  load("val.jsonl", splits.val);
  load("test.jsonl", splits.test);
  return splits;
}

}  // namespace e2elr
