#include "e2elr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <thread>

#include "e2elr/ed_core.hpp"
#include "e2elr/error.hpp"
#include "e2elr/repair.hpp"

namespace e2elr {

using nlohmann::json;

std::vector<double> perturb_loads(std::span<const double> d_ref, const GenConfig& cfg, Rng& rng) {
  const double gamma = rng.uniform(cfg.gamma_min, cfg.gamma_max);
  const double var_log = std::log1p(cfg.noise_sd * cfg.noise_sd);
  const double mu = -0.5 * var_log;
  const double sigma = std::sqrt(var_log);
  std::vector<double> d(d_ref.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double eta = cfg.noise_sd > 0.0 ? rng.lognormal(mu, sigma) : 1.0;
    d[i] = gamma * eta * d_ref[i];
  }
  return d;
}

double reserve_fraction(std::span<const double> p_max) {
  const double total = std::accumulate(p_max.begin(), p_max.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("reserve capacity needs a positive total p_max");
  const double largest = *std::max_element(p_max.begin(), p_max.end());
  return std::min(1.0, 5.0 * largest / total);
}

std::vector<double> reserve_capacity(std::span<const double> p_max) {
  const double alpha = reserve_fraction(p_max);
  std::vector<double> r(p_max.size());
  for (std::size_t g = 0; g < r.size(); ++g) r[g] = alpha * p_max[g];
  return r;
}

double sample_reserve_requirement(std::span<const double> p_max, const GenConfig& cfg, Rng& rng) {
  if (p_max.empty()) throw ValidationError("no generators");
  if (!cfg.reserve_mode) return 0.0;
  const double largest = *std::max_element(p_max.begin(), p_max.end());
  return rng.uniform(cfg.reserve_min, cfg.reserve_max) * largest;
}

std::array<std::size_t, 3> split_sizes(std::size_t count, const std::array<double, 3>& f) {
  for (double v : f) {
    if (!(v >= 0.0)) throw ValidationError("split fractions must be non-negative");
  }
  const double total = f[0] + f[1] + f[2];
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
  const auto n = static_cast<double>(count);
  const std::size_t train = std::min(count, static_cast<std::size_t>(std::llround(n * f[0])));
  const std::size_t val = std::min(count - train, static_cast<std::size_t>(std::llround(n * f[1])));
  return {train, val, count - train - val};
}

NormalizedCase prepare_case(const SystemCase& system) {
  NormalizedCase nc = normalize_case(system);
  const std::vector<double> r = reserve_capacity(system.p_max());
  for (std::size_t g = 0; g < nc.system.generators.size(); ++g) {
    Generator& gen = nc.system.generators[g];
    gen.r_max_pu = std::min(r[g], gen.p_max_pu);
  }
  return nc;
}

GeneratedDataset generate_dataset(const SystemCase& system, const GenConfig& cfg) {
  if (cfg.count == 0) throw ValidationError("instance count must be positive");
  const NormalizedCase nc = prepare_case(system);
  const std::vector<double> d_ref = system.demand();
  const std::vector<double> p_max_orig = system.p_max();
  const std::vector<double> p_max = nc.system.p_max();
  const std::vector<double> r_max = nc.system.r_max();

  GeneratedDataset out;
  out.system = nc.system;
  out.system.ptdf = DenseMatrix();
  out.manifest.seed = cfg.seed;
  out.manifest.case_sha256 = case_sha256(out.system);

  std::vector<Sample> samples;
  samples.reserve(cfg.count);
  const std::size_t max_attempts = cfg.count * std::max<std::size_t>(1, cfg.max_attempts_per_instance);
  for (std::size_t attempt = 0; samples.size() < cfg.count; ++attempt) {
    if (attempt >= max_attempts) {
      throw ValidationError("too many infeasible draws (" + std::to_string(out.manifest.rejected) + " rejected)");
    }
    Rng rng = Rng::stream(cfg.seed, attempt);
    Sample s;
    s.d = perturb_loads(d_ref, cfg, rng);
    for (std::size_t i = 0; i < s.d.size(); ++i) s.d[i] -= nc.demand_offset[i];
    s.R = sample_reserve_requirement(p_max_orig, cfg, rng);
    const double D = std::accumulate(s.d.begin(), s.d.end(), 0.0);
    if (!(D > 0.0) || !feasibility_certificate(RepairContext(p_max, r_max, D, s.R)).feasible) {
      ++out.manifest.rejected;
      continue;
    }
    samples.push_back(std::move(s));
  }

  if (cfg.label) {
    const EDNetwork network(nc.system);
    unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, samples.size()));
    std::vector<std::string> errors(workers);
    auto label_range = [&](unsigned w) {
      try {
        for (std::size_t i = w; i < samples.size(); i += workers) {
          const EDInstance inst = network.instance(samples[i].d, samples[i].R);
          const DispatchSolution sol = solve_reference(inst);
          if (sol.status != SolveStatus::kOptimal) {
            throw NumericalError("reference solve of instance " + std::to_string(i) + " ended " +
                                 to_string(sol.status));
          }
          samples[i].solution = LabeledSolution{sol.p, sol.r, sol.objective};
        }
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(label_range, w);
    label_range(0);
    for (auto& t : pool) t.join();
    for (const std::string& e : errors) {
      if (!e.empty()) throw NumericalError(e);
    }
    out.manifest.solver_invocations = samples.size();
  }

  const auto sizes = split_sizes(samples.size(), cfg.split);
  out.manifest.counts = sizes;
  auto take = [&](std::size_t from, std::size_t n) {
    return std::vector<Sample>(samples.begin() + static_cast<std::ptrdiff_t>(from),
                               samples.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  out.splits.train = take(0, sizes[0]);
  out.splits.val = take(sizes[0], sizes[1]);
  out.splits.test = take(sizes[0] + sizes[1], sizes[2]);
  return out;
}

void write_dataset(const std::filesystem::path& dir, const GeneratedDataset& data, const GenConfig& cfg) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "case.json", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "case.json").string());
    out << case_to_json(data.system) << '\n';
  }
  write_samples(dir / "train.jsonl", data.splits.train);
  write_samples(dir / "val.jsonl", data.splits.val);
  write_samples(dir / "test.jsonl", data.splits.test);

  const DatasetManifest& m = data.manifest;
  json manifest;
  manifest["seed"] = m.seed;
  manifest["config"] = {{"mode", cfg.reserve_mode ? "edr" : "ed"},
                        {"label", cfg.label ? "reference" : "none"},
                        {"n", cfg.count},
                        {"split", cfg.split},
                        {"gamma_range", {cfg.gamma_min, cfg.gamma_max}},
                        {"noise_sd", cfg.noise_sd},
                        {"reserve_range", {cfg.reserve_min, cfg.reserve_max}}};
  manifest["case_sha256"] = m.case_sha256;
  manifest["counts"] = {{"train", m.counts[0]}, {"val", m.counts[1]}, {"test", m.counts[2]}};
  manifest["rejected"] = m.rejected;
  manifest["solver_invocations"] = m.solver_invocations;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
}

DatasetManifest build_dataset(const SystemCase& system, const GenConfig& cfg, const std::filesystem::path& dir) {
  const GeneratedDataset data = generate_dataset(system, cfg);
  write_dataset(dir, data, cfg);
  return data.manifest;
}

}  // namespace e2elr
