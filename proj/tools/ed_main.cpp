// ed: command-line front end for the economic dispatch toolkit.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "e2elr/bench.hpp"
#include "e2elr/datagen.hpp"
#include "e2elr/dataset.hpp"
#include "e2elr/ed_core.hpp"
#include "e2elr/error.hpp"
#include "e2elr/grid_model.hpp"
#include "e2elr/repair.hpp"
#include "e2elr/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// A .json case is a normalized snapshot (as written by `ed generate`) and is
// used as is. Any other file is prepared the same way generation prepares it.
e2elr::SystemCase load_network_case(const fs::path& path) {
  e2elr::SystemCase system = e2elr::load_case(path);
  if (path.extension() == ".json") return system;
  return e2elr::prepare_case(system).system;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw e2elr::Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw e2elr::Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

json vec(const std::vector<double>& v) { return json(v); }

int cmd_solve(const std::string& case_path, const std::string& instances, const std::string& out_path,
              double tol, int rows_per_round) {
  const e2elr::EDNetwork network(load_network_case(case_path));
  const std::vector<e2elr::Sample> samples = e2elr::read_samples(instances);
  e2elr::ReferenceSolverOptions options;
  options.tol = tol;
  options.rows_per_round = rows_per_round;
  Output out(out_path);
  int failures = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const e2elr::EDInstance inst = network.instance(samples[i].d, samples[i].R);
    const e2elr::DispatchSolution sol = e2elr::solve_reference(inst, options);
    json j;
    j["index"] = i;
    j["status"] = e2elr::to_string(sol.status);
    if (sol.status == e2elr::SolveStatus::kOptimal) {
      j["p"] = vec(sol.p);
      j["r"] = vec(sol.r);
      j["objective"] = sol.objective;
      j["rounds"] = sol.rounds;
      j["thermal_rows"] = sol.thermal_rows;
    } else {
      ++failures;
    }
    out.stream() << j.dump() << '\n';
  }
  if (failures > 0) std::cerr << failures << " instance(s) not solved to optimality\n";
  return failures > 0 ? 2 : 0;
}

int cmd_repair(const std::string& case_path, const std::string& instances, const std::string& dispatch,
               const std::string& mode, const std::string& out_path) {
  const bool with_reserve = mode == "balance+reserve";
  const e2elr::EDNetwork network(load_network_case(case_path));
  const std::vector<e2elr::Sample> samples = e2elr::read_samples(instances);
  const std::vector<std::string> lines = read_lines(dispatch);
  if (lines.size() != samples.size()) {
    throw e2elr::UsageError("dispatch file has " + std::to_string(lines.size()) + " lines, instances file has " +
                            std::to_string(samples.size()));
  }
  Output out(out_path);
  int infeasible = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const e2elr::EDInstance inst = network.instance(samples[i].d, samples[i].R);
    json in;
    try {
      in = json::parse(lines[i]);
    } catch (const json::exception& e) {
      throw e2elr::ParseError(e.what(), i + 1);
    }
    std::vector<double> p = in.is_array() ? in.get<std::vector<double>>() : in.at("p").get<std::vector<double>>();
    if (p.size() != inst.num_generators()) {
      throw e2elr::ParseError("dispatch has wrong length", i + 1);
    }
    // Inputs outside [0, p_max] are clipped into the box first.
    for (std::size_t g = 0; g < p.size(); ++g) p[g] = std::clamp(p[g], 0.0, inst.p_max[g]);

    const e2elr::RepairContext ctx(inst.p_max, inst.r_max, inst.D, with_reserve ? inst.R : 0.0);
    const e2elr::FeasibilityCertificate cert = e2elr::feasibility_certificate(ctx);
    json j;
    j["index"] = i;
    j["certificate"] = {{"feasible", cert.feasible}, {"witness", cert.witness}};
    if (cert.feasible) {
      std::vector<double> q = e2elr::power_balance_repair(p, ctx).p;
      if (with_reserve) q = e2elr::reserve_repair(q, ctx).p;
      const std::vector<double> r = e2elr::max_reserves(inst, q);
      j["p"] = vec(q);
      j["r"] = vec(r);
      j["balance_violation"] = e2elr::balance_violation<double>(inst, q);
      j["reserve_shortage"] = e2elr::reserve_shortage(inst, q);
      j["objective"] = e2elr::penalized_objective(inst, q);
    } else {
      ++infeasible;
    }
    out.stream() << j.dump() << '\n';
  }
  if (infeasible > 0) std::cerr << infeasible << " instance(s) have no feasible dispatch\n";
  return 0;
}

struct TrainArgs {
  std::string case_path, data_dir, arch = "e2elr", loss = "ssl", out, log;
  std::uint64_t seed = 0;
  int epochs = -1;
  double max_seconds = 0.0;
  double lambda = -1.0, mu = -1.0, lr = -1.0;
  int hidden = -1, layers = -1, batch = -1;
};

int cmd_train(const TrainArgs& a) {
  const e2elr::EDNetwork network(load_network_case(a.case_path));
  const e2elr::DatasetSplits data = e2elr::read_dataset(a.data_dir);
  e2elr::TrainConfig cfg;
  cfg.arch = e2elr::parse_arch(a.arch);
  cfg.loss = e2elr::parse_loss(a.loss);
  cfg.seed = a.seed;
  cfg.lambda = a.lambda;
  cfg.mu = a.mu;
  if (a.lr > 0.0) cfg.lr = a.lr;
  if (a.epochs > 0) cfg.max_epochs = a.epochs;
  if (a.hidden > 0) cfg.hidden_dim = static_cast<std::size_t>(a.hidden);
  if (a.layers > 0) cfg.num_layers = static_cast<std::size_t>(a.layers);
  if (a.batch > 0) cfg.batch_size = static_cast<std::size_t>(a.batch);
  cfg.max_seconds = a.max_seconds;
  cfg.reserve_mode = std::any_of(data.train.begin(), data.train.end(),
                                 [](const e2elr::Sample& s) { return s.R > 0.0; });
  const e2elr::TrainResult result = e2elr::train(cfg, network, data);
  e2elr::save_proxy(a.out, result.proxy);
  fs::path log_path = a.log.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.log);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw e2elr::Error("cannot write " + log_path.string());
  log << e2elr::log_to_csv(result.log);
  return 0;
}

std::array<double, 3> parse_split(const std::string& text) {
  std::array<double, 3> split{};
  std::stringstream ss(text);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 3) throw e2elr::UsageError("--split needs three fractions");
    try {
      split[k++] = std::stod(item);
    } catch (const std::exception&) {
      throw e2elr::UsageError("bad --split entry '" + item + "'");
    }
  }
  if (k != 3) throw e2elr::UsageError("--split needs three fractions");
  return split;
}

int cmd_generate(const std::string& case_path, std::size_t n, const std::string& split, const std::string& mode,
                 const std::string& label, std::uint64_t seed, unsigned threads, const std::string& out) {
  e2elr::GenConfig cfg;
  cfg.count = n;
  cfg.split = parse_split(split);
  cfg.reserve_mode = mode == "edr";
  cfg.label = label == "reference";
  cfg.seed = seed;
  cfg.threads = threads;
  const e2elr::DatasetManifest m = e2elr::build_dataset(e2elr::load_case(case_path), cfg, out);
  std::cerr << "wrote " << m.counts[0] << "/" << m.counts[1] << "/" << m.counts[2] << " instances, "
            << m.rejected << " rejected\n";
  return 0;
}

int cmd_bench(const std::string& case_path, const std::string& data_dir, const std::string& models,
              const std::string& out, std::size_t batch) {
  const e2elr::EDNetwork network(load_network_case(case_path));
  const e2elr::DatasetSplits data = e2elr::read_dataset(data_dir);
  std::vector<fs::path> paths;
  std::stringstream ss(models);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) paths.emplace_back(item);
  }
  e2elr::BenchConfig cfg;
  cfg.batch_size = batch;
  cfg.out_dir = out;
  const e2elr::BenchOutput result = e2elr::run_benchmark(network, data.test, paths, cfg);
  for (const std::string& s : result.skipped) std::cerr << "skipped " << s << '\n';
  std::cout << result.tables.gap_md << '\n' << result.tables.feasibility_md << '\n' << result.inference_md;
  return 0;
}

int cmd_bench_repair(const std::string& case_path, const std::vector<std::size_t>& sizes, int reps,
                     std::uint64_t seed, const std::string& out) {
  const e2elr::SystemCase system = load_network_case(case_path);
  const std::vector<double> pool = system.p_max();
  std::vector<e2elr::RepairTiming> rows;
  for (std::size_t n : sizes) {
    rows.push_back(e2elr::time_repair_vs_projection(pool, n, reps, false, seed));
    rows.push_back(e2elr::time_repair_vs_projection(pool, n, reps, true, seed));
  }
  std::cout << e2elr::timing_table_md(rows);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw e2elr::Error("cannot write " + out);
    f << e2elr::timing_table_csv(rows);
  }
  return 0;
}

int cmd_synth(int buses, int gens, std::uint64_t seed, const std::string& out) {
  e2elr::SyntheticCaseOptions opt;
  opt.num_buses = buses;
  opt.num_generators = gens;
  opt.seed = seed;
  Output o(out);
  o.stream() << e2elr::serialize_case(e2elr::make_synthetic_case(opt));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Economic dispatch proxies: reference solver, repair layers, training and benchmarks"};
  app.require_subcommand(1);

  std::string case_path, instances, out, dispatch, mode, data_dir, models, label, split = "0.8,0.1,0.1";
  double tol = 1e-8;
  int rows_per_round = 20;

  auto* solve = app.add_subcommand("solve", "Solve instances with the reference solver");
  solve->add_option("--case", case_path, "Case file (.m or normalized .json)")->required();
  solve->add_option("--instances", instances, "Instances JSONL")->required();
  solve->add_option("--out", out, "Output JSONL (default stdout)");
  solve->add_option("--tol", tol, "Thermal violation tolerance")->capture_default_str();
  solve->add_option("--rows-per-round", rows_per_round, "Branches added per round")->capture_default_str();

  auto* repair = app.add_subcommand("repair", "Repair dispatches and emit feasibility certificates");
  repair->add_option("--case", case_path)->required();
  repair->add_option("--instances", instances)->required();
  repair->add_option("--dispatch", dispatch, "JSONL of {\"p\": [...]} or bare arrays")->required();
  repair->add_option("--mode", mode)->check(CLI::IsMember({"balance", "balance+reserve"}))->default_val("balance");
  repair->add_option("--out", out, "Output JSONL (default stdout)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a proxy");
  train->add_option("--case", ta.case_path)->required();
  train->add_option("--data", ta.data_dir)->required();
  train->add_option("--arch", ta.arch)->check(CLI::IsMember({"dnn", "deepopf", "dc3", "e2elr"}))->capture_default_str();
  train->add_option("--loss", ta.loss)->check(CLI::IsMember({"sl", "ssl"}))->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--log", ta.log, "CSV log (default: checkpoint path with .csv)");
  train->add_option("--epochs", ta.epochs, "Maximum epochs");
  train->add_option("--max-seconds", ta.max_seconds, "Wall-clock budget, 0 = none");
  train->add_option("--lambda", ta.lambda);
  train->add_option("--mu", ta.mu);
  train->add_option("--lr", ta.lr);
  train->add_option("--hidden", ta.hidden);
  train->add_option("--layers", ta.layers);
  train->add_option("--batch", ta.batch);

  std::size_t n = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto* gen = app.add_subcommand("generate", "Generate a dataset");
  gen->add_option("--case", case_path)->required();
  gen->add_option("--n", n)->required();
  gen->add_option("--split", split)->capture_default_str();
  gen->add_option("--mode", mode)->check(CLI::IsMember({"ed", "edr"}))->default_val("ed");
  gen->add_option("--label", label)->check(CLI::IsMember({"none", "reference"}))->default_val("none");
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--threads", threads, "Labeling threads, 0 = all cores");
  gen->add_option("--out", out)->required();

  std::size_t batch = 256;
  auto* bench = app.add_subcommand("bench", "Evaluate checkpoints on the test split");
  bench->add_option("--case", case_path)->required();
  bench->add_option("--data", data_dir)->required();
  bench->add_option("--models", models, "Comma-separated checkpoints")->required();
  bench->add_option("--out", out)->required();
  bench->add_option("--batch", batch)->capture_default_str();

  std::vector<std::size_t> sizes{1000};
  int reps = 100;
  auto* bench_repair = app.add_subcommand("bench-repair", "Time repair layers against the exact projection");
  bench_repair->add_option("--case", case_path)->required();
  bench_repair->add_option("--n", sizes, "Generator counts")->delimiter(',');
  bench_repair->add_option("--reps", reps)->capture_default_str();
  bench_repair->add_option("--seed", seed)->capture_default_str();
  bench_repair->add_option("--out", out, "CSV table");

  int buses = 30, gens = 20;
  auto* synth = app.add_subcommand("synth", "Write a synthetic MATPOWER case");
  synth->add_option("--buses", buses)->capture_default_str();
  synth->add_option("--gens", gens)->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--out", out, "Output .m (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  try {
    if (*solve) return cmd_solve(case_path, instances, out, tol, rows_per_round);
    if (*repair) return cmd_repair(case_path, instances, dispatch, mode, out);
    if (*train) return cmd_train(ta);
    if (*gen) return cmd_generate(case_path, n, split, mode, label, seed, threads, out);
    if (*bench) return cmd_bench(case_path, data_dir, models, out, batch);
    if (*bench_repair) return cmd_bench_repair(case_path, sizes, reps, seed, out);
    if (*synth) return cmd_synth(buses, gens, seed, out);
  } catch (const e2elr::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 64;
  } catch (const e2elr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 65;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
