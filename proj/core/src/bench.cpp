#include "e2elr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "e2elr/datagen.hpp"
#include "e2elr/metrics.hpp"
#include "e2elr/projection.hpp"
#include "e2elr/repair.hpp"

namespace e2elr {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::string record_to_json(const EvalRecord& r) {
  json j;
  j["instance"] = r.instance;
  j["model"] = r.model;
  j["arch"] = r.arch;
  j["loss"] = r.loss;
  j["objective"] = r.objective;
  j["reference"] = r.reference;
  j["gap"] = r.gap;
  j["feasible"] = r.feasible;
  j["violation"] = {{"balance", r.balance},
                    {"reserve", r.reserve},
                    {"eco_max", r.eco_max},
                    {"dispatch_bounds", r.dispatch_bounds},
                    {"reserve_bounds", r.reserve_bounds},
                    {"max", r.max_violation}};
  j["inference_seconds"] = r.inference_seconds;
  return j.dump();
}

EvalRecord record_from_json(const std::string& line) {
  const json j = json::parse(line);
  EvalRecord r;
  r.instance = j.at("instance").get<std::size_t>();
  r.model = j.at("model").get<std::string>();
  r.arch = j.at("arch").get<std::string>();
  r.loss = j.at("loss").get<std::string>();
  r.objective = j.at("objective").get<double>();
  r.reference = j.at("reference").get<double>();
  r.gap = j.at("gap").get<double>();
  r.feasible = j.at("feasible").get<bool>();
  const json& v = j.at("violation");
  r.balance = v.at("balance").get<double>();
  r.reserve = v.at("reserve").get<double>();
  r.eco_max = v.at("eco_max").get<double>();
  r.dispatch_bounds = v.at("dispatch_bounds").get<double>();
  r.reserve_bounds = v.at("reserve_bounds").get<double>();
  r.max_violation = v.at("max").get<double>();
  r.inference_seconds = j.value("inference_seconds", 0.0);
  return r;
}

void write_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::string text;
  for (const EvalRecord& r : records) text += record_to_json(r) + "\n";
  write_text(path, text);
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), number);
    }
  }
  return out;
}

EvalRecord score_prediction(const EDInstance& inst, std::span<const double> p, double reference) {
  EvalRecord r;
  const std::vector<double> reserves = max_reserves(inst, p);
  const FeasibilityReport rep = check_feasibility(inst, p, reserves, kFeasibilityTol);
  r.objective = penalized_objective(inst, p);
  r.reference = reference;
  r.gap = optimality_gap(r.objective, reference);
  r.feasible = rep.feasible;
  r.balance = rep.balance;
  r.reserve = rep.reserve;
  r.eco_max = rep.eco_max;
  r.dispatch_bounds = rep.dispatch_bounds;
  r.reserve_bounds = rep.reserve_bounds;
  r.max_violation = rep.max_violation();
  return r;
}

std::vector<ModelSummary> summarize(const std::vector<EvalRecord>& records) {
  std::vector<ModelSummary> out;
  std::vector<std::vector<const EvalRecord*>> groups;
  for (const EvalRecord& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ModelSummary& s) { return s.model == r.model; });
    if (it == out.end()) {
      out.push_back({r.model, r.arch, r.loss});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    ModelSummary& s = out[k];
    std::vector<double> gaps, violations;
    double gap_sum = 0.0;
    for (const EvalRecord* r : groups[k]) {
      gaps.push_back(std::max(0.0, r->gap));
      gap_sum += r->gap;
      violations.push_back(r->max_violation);
      s.max_balance = std::max(s.max_balance, r->balance);
    }
    s.count = groups[k].size();
    s.gap_sgm = shifted_geometric_mean(gaps, kGapShift);
    s.gap_mean = gap_sum / static_cast<double>(s.count);
    const FeasibilitySummary f = feasibility_rate(violations);
    s.percent_feasible = f.percent_feasible;
    s.mean_violation = f.mean_violation.value_or(0.0);
  }
  return out;
}

Tables emit_tables(const std::vector<EvalRecord>& records) {
  Tables t;
  const auto rows = summarize(records);
  t.gap_csv = "model,arch,loss,instances,gap_sgm_pct,gap_mean_pct\n";
  t.gap_md = "| model | arch | loss | instances | gap SGM (%) | gap mean (%) |\n|---|---|---|---:|---:|---:|\n";
  t.feasibility_csv = "model,arch,loss,instances,feasible_pct,violation_sgm_pu,max_balance_pu\n";
  t.feasibility_md =
      "| model | arch | loss | instances | feasible (%) | violation SGM (p.u.) | max balance (p.u.) |\n"
      "|---|---|---|---:|---:|---:|---:|\n";
  for (const ModelSummary& s : rows) {
    const std::string n = std::to_string(s.count);
    const std::string sgm = fmt("%.4f", 100.0 * s.gap_sgm);
    const std::string mean = fmt("%.4f", 100.0 * s.gap_mean);
    const std::string feas = fmt("%.2f", s.percent_feasible);
    const std::string viol = s.mean_violation > 0.0 ? fmt("%.6g", s.mean_violation) : "-";
    const std::string bal = fmt("%.6g", s.max_balance);
    t.gap_csv += s.model + "," + s.arch + "," + s.loss + "," + n + "," + sgm + "," + mean + "\n";
    t.gap_md += "| " + s.model + " | " + s.arch + " | " + s.loss + " | " + n + " | " + sgm + " | " + mean + " |\n";
    t.feasibility_csv += s.model + "," + s.arch + "," + s.loss + "," + n + "," + feas + "," +
                         (s.mean_violation > 0.0 ? viol : "") + "," + bal + "\n";
    t.feasibility_md += "| " + s.model + " | " + s.arch + " | " + s.loss + " | " + n + " | " + feas + " | " + viol +
                        " | " + bal + " |\n";
  }
  return t;
}

RepairTiming time_repair_vs_projection(std::span<const double> p_max_pool, std::size_t n, int reps,
                                       bool reserve_mode, std::uint64_t seed) {
  if (p_max_pool.empty() || n == 0 || reps <= 0) throw ContractError("timing needs generators and repetitions");
  Rng rng(seed);
  std::vector<double> p_max(n);
  for (double& v : p_max) v = p_max_pool[rng.below(p_max_pool.size())];
  const std::vector<double> r_max = reserve_capacity(p_max);
  double total = 0.0;
  for (double v : p_max) total += v;
  const double largest = *std::max_element(p_max.begin(), p_max.end());
  const double D = 0.6 * total;
  const double R = reserve_mode ? rng.uniform(1.0, 2.0) * largest : 0.0;
  const RepairContext ctx(p_max, r_max, D, R);
  if (!feasibility_certificate(ctx).feasible) throw ContractError("timing context is infeasible");
  const EDInstance inst = make_instance(p_max, r_max, std::vector<double>(n, 1.0), D, R);

  constexpr std::size_t kInputs = 16;
  std::vector<std::vector<double>> inputs(kInputs, std::vector<double>(n));
  for (auto& p : inputs) {
    for (std::size_t g = 0; g < n; ++g) p[g] = rng.uniform01() * p_max[g];
  }

  std::vector<double> buf(n);
  double sink = 0.0;
  std::vector<double> repair_t, proj_t;
  constexpr int kWarmup = 10;
  for (int k = -kWarmup; k < reps; ++k) {
    const auto& in = inputs[static_cast<std::size_t>(k + kWarmup) % kInputs];
    std::copy(in.begin(), in.end(), buf.begin());
    const auto t0 = Clock::now();
    apply_power_balance_repair(buf, ctx);
    if (reserve_mode) apply_reserve_repair(buf, ctx);
    const double dt = seconds_since(t0);
    sink += buf[0];
    if (k >= 0) repair_t.push_back(dt);
  }
  for (int k = -kWarmup; k < reps; ++k) {
    const auto& in = inputs[static_cast<std::size_t>(k + kWarmup) % kInputs];
    const auto t0 = Clock::now();
    const std::vector<double> x = reserve_mode ? project_feasible_edr(in, inst) : project_hypersimplex(in, p_max, D);
    const double dt = seconds_since(t0);
    sink += x[0];
    if (k >= 0) proj_t.push_back(dt);
  }
  volatile double keep = sink;
  (void)keep;

  RepairTiming t;
  t.generators = n;
  t.reserve_mode = reserve_mode;
  t.reps = reps;
  t.repair_seconds = median(repair_t);
  t.projection_seconds = median(proj_t);
  return t;
}

std::string timing_table_md(const std::vector<RepairTiming>& rows) {
  std::string s =
      "| mode | generators | reps | repair median (us) | projection median (us) | speedup |\n"
      "|---|---:|---:|---:|---:|---:|\n";
  for (const RepairTiming& r : rows) {
    s += "| " + std::string(r.reserve_mode ? "ED-R" : "ED") + " | " + std::to_string(r.generators) + " | " +
         std::to_string(r.reps) + " | " + fmt("%.3f", 1e6 * r.repair_seconds) + " | " +
         fmt("%.3f", 1e6 * r.projection_seconds) + " | " + fmt("%.1f", r.speedup()) + "x |\n";
  }
  return s;
}

std::string timing_table_csv(const std::vector<RepairTiming>& rows) {
  std::string s = "mode,generators,reps,repair_median_s,projection_median_s,speedup\n";
  for (const RepairTiming& r : rows) {
    s += std::string(r.reserve_mode ? "edr" : "ed") + "," + std::to_string(r.generators) + "," +
         std::to_string(r.reps) + "," + fmt("%.9g", r.repair_seconds) + "," + fmt("%.9g", r.projection_seconds) +
         "," + fmt("%.6g", r.speedup()) + "\n";
  }
  return s;
}

BenchOutput run_benchmark(const EDNetwork& network, const std::vector<Sample>& test,
                          const std::vector<std::filesystem::path>& models, const BenchConfig& config) {
  if (test.empty()) throw ValidationError("benchmark needs a non-empty test split");
  if (config.batch_size == 0) throw ValidationError("batch size must be >= 1");
  BenchOutput out;

  std::vector<EDInstance> instances;
  instances.reserve(test.size());
  for (const Sample& s : test) instances.push_back(network.instance(s.d, s.R));
  std::vector<double> reference(test.size());
  std::vector<double> solve_times;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool timed = solve_times.size() < 50;
    if (test[i].solution && !timed) {
      reference[i] = test[i].solution->objective;
      continue;
    }
    const auto t0 = Clock::now();
    const DispatchSolution sol = solve_reference(instances[i]);
    solve_times.push_back(seconds_since(t0));
    if (sol.status != SolveStatus::kOptimal) {
      throw NumericalError("reference solve failed on test instance " + std::to_string(i));
    }
    reference[i] = test[i].solution ? test[i].solution->objective : sol.objective;
  }

  std::string inference = "| model | batch size | batches | median batch time (ms) | per instance (us) |\n"
                          "|---|---:|---:|---:|---:|\n";
  for (const auto& path : models) {
    TrainedProxy proxy;
    try {
      proxy = load_proxy(path);
    } catch (const std::exception& e) {
      out.skipped.push_back(path.string() + ": " + e.what());
      continue;
    }
    const std::string label = path.stem().string();
    std::vector<double> batch_times;
    for (std::size_t begin = 0; begin < instances.size(); begin += config.batch_size) {
      const std::size_t end = std::min(instances.size(), begin + config.batch_size);
      const std::span<const EDInstance> batch(instances.data() + begin, end - begin);
      const auto t0 = Clock::now();
      const auto preds = predict_batch(proxy, batch);
      const double dt = seconds_since(t0);
      batch_times.push_back(dt);
      for (std::size_t b = 0; b < preds.size(); ++b) {
        EvalRecord r = score_prediction(instances[begin + b], preds[b], reference[begin + b]);
        r.instance = begin + b;
        r.model = label;
        r.arch = to_string(proxy.arch);
        r.loss = to_string(proxy.meta.loss);
        r.inference_seconds = dt / static_cast<double>(preds.size());
        out.records.push_back(std::move(r));
      }
    }
    const double med = median(batch_times);
    inference += "| " + label + " | " + std::to_string(config.batch_size) + " | " +
                 std::to_string(batch_times.size()) + " | " + fmt("%.3f", 1e3 * med) + " | " +
                 fmt("%.3f", 1e6 * med / static_cast<double>(std::min(config.batch_size, instances.size()))) +
                 " |\n";
  }
  inference += "\nReference solve: median " + fmt("%.3f", 1e3 * median(solve_times)) + " ms per instance over " +
               std::to_string(solve_times.size()) + " instances.\n";
  out.inference_md = inference;
  out.tables = emit_tables(out.records);

  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    write_records(config.out_dir / "records.jsonl", out.records);
    write_text(config.out_dir / "gap.csv", out.tables.gap_csv);
    write_text(config.out_dir / "gap.md", out.tables.gap_md);
    write_text(config.out_dir / "feasibility.csv", out.tables.feasibility_csv);
    write_text(config.out_dir / "feasibility.md", out.tables.feasibility_md);
    write_text(config.out_dir / "inference.md", out.inference_md);
  }
  return out;
}

}  // namespace e2elr
