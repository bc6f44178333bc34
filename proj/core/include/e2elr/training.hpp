#pragma once

// Proxy architectures, losses and the training loop.
//
//   DNN      p = z * p_max
//   E2ELR    p = reserve_repair(power_balance_repair(z * p_max))
//   DeepOPF  network predicts generators 1..G-1; generator 0 closes the balance
//   DC3      DeepOPF followed by T gradient steps on the squared violation

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "e2elr/autodiff.hpp"
#include "e2elr/dataset.hpp"
#include "e2elr/ed_core.hpp"
#include "e2elr/mlp.hpp"
#include "e2elr/repair.hpp"

namespace e2elr {

enum class Arch { kDnn, kDeepOpf, kDc3, kE2elr };
enum class LossKind { kSupervised, kSelfSupervised };

std::string to_string(Arch arch);
std::string to_string(LossKind loss);
Arch parse_arch(const std::string& text);
LossKind parse_loss(const std::string& text);

// Number of network outputs for an architecture on |G| generators.
std::size_t output_width(Arch arch, std::size_t num_generators);

// ---------------------------------------------------------------------------
// Repair layers on both scalar types. The ad::Var forms record one custom
// block whose backward pass is the analytic vector-Jacobian product.

std::vector<double> balance_layer(std::span<const double> p, const RepairContext& ctx);
std::vector<ad::Var> balance_layer(std::span<const ad::Var> p, const RepairContext& ctx);
std::vector<double> reserve_layer(std::span<const double> p, const RepairContext& ctx);
std::vector<ad::Var> reserve_layer(std::span<const ad::Var> p, const RepairContext& ctx);

// ---------------------------------------------------------------------------
// Baseline building blocks.

// Generator 0 takes D - sum(others); no bound enforcement.
template <class S>
std::vector<S> deepopf_complete(std::span<const S> independent, double D) {
  if (independent.empty()) throw ContractError("DeepOPF completion needs at least one independent output");
  std::vector<S> p;
  p.reserve(independent.size() + 1);
  p.push_back(D - sum(independent));
  p.insert(p.end(), independent.begin(), independent.end());
  return p;
}

// T steps of p_ind <- p_ind - rho * grad ||g(p)||^2 with p_0 = D - sum(p_ind),
// where g stacks the upper and lower bound excess of every generator and the
// reserve shortfall. The reserve term uses the active branch of
// min(r_max, p_max - p) at the current iterate.
template <class S>
std::vector<S> dc3_correct(std::span<const S> p0, const EDInstance& inst, int steps, double rho) {
  const std::size_t G = p0.size();
  if (G != inst.num_generators()) throw ContractError("dispatch dimension mismatch");
  std::vector<S> p(p0.begin(), p0.end());
  if (G < 2) return p;
  std::vector<S> grad(G);
  for (int t = 0; t < steps; ++t) {
    std::vector<S> v(G);
    std::vector<double> active(G);
    bool any = false;
    for (std::size_t g = 0; g < G; ++g) {
      const S up = pos(p[g] - inst.p_max[g]);
      const S down = pos(-p[g]);
      v[g] = (up - down) * 2.0;
      active[g] = inst.p_max[g] - value_of(p[g]) < inst.r_max[g] ? 1.0 : 0.0;
      any = any || value_of(up) > 0.0 || value_of(down) > 0.0;
    }
    S shortfall = constant_like(p[0], 0.0);
    if (inst.R > 0.0) {
      shortfall = reserve_shortfall(inst, std::span<const S>(p));
      any = any || value_of(shortfall) > 0.0;
    }
    if (!any) break;
    std::vector<S> ind(p.begin() + 1, p.end());
    for (std::size_t j = 1; j < G; ++j) {
      S gj = v[j] - v[0];
      if (inst.R > 0.0) gj = gj + shortfall * (2.0 * (active[j] - active[0]));
      ind[j - 1] = ind[j - 1] - gj * rho;
    }
    p = deepopf_complete(std::span<const S>(ind), inst.D);
  }
  return p;
}

// Network output z -> dispatch, for every architecture.
template <class S>
std::vector<S> dispatch_from_output(Arch arch, std::span<const S> z, const EDInstance& inst,
                                    const RepairContext& ctx, bool reserve_mode, int dc3_steps,
                                    double dc3_rho) {
  const std::size_t G = inst.num_generators();
  if (z.size() != output_width(arch, G)) throw ContractError("network output has the wrong width");
  switch (arch) {
    case Arch::kDnn:
      return scale_to_bounds(z, inst.p_max);
    case Arch::kE2elr: {
      std::vector<S> p = scale_to_bounds(z, inst.p_max);
      p = balance_layer(std::span<const S>(p), ctx);
      if (reserve_mode) p = reserve_layer(std::span<const S>(p), ctx);
      return p;
    }
    case Arch::kDeepOpf:
    case Arch::kDc3: {
      const std::vector<S> ind = scale_to_bounds(z, std::span<const double>(inst.p_max).subspan(1));
      std::vector<S> p = deepopf_complete(std::span<const S>(ind), inst.D);
      if (arch == Arch::kDc3) p = dc3_correct(std::span<const S>(p), inst, dc3_steps, dc3_rho);
      return p;
    }
  }
  throw ContractError("unknown architecture");
}

// ---------------------------------------------------------------------------
// Losses. Penalty prices are applied to per-unit quantities.

// (1/|G|) |p - p*|_1 + lambda (M_pb |e'p - D| + M_r xi_r) + mu M_th |xi_th|_1
template <class S>
S sl_loss(std::span<const S> p, std::span<const double> target, const EDInstance& inst, double lambda,
          double mu) {
  if (p.size() != target.size()) throw ContractError("label dimension mismatch");
  S mae = constant_like(p[0], 0.0);
  for (std::size_t g = 0; g < p.size(); ++g) mae = mae + abs_value(p[g] - target[g]);
  S loss = mae * (1.0 / static_cast<double>(p.size()));
  if (lambda != 0.0) {
    loss = loss + (balance_violation(inst, p) * inst.prices.balance +
                   reserve_shortfall(inst, p) * inst.prices.reserve) *
                      lambda;
  }
  if (mu != 0.0) loss = loss + thermal_violation_total(inst, p) * (mu * inst.prices.thermal);
  return loss;
}

// c(p) + M_th |xi_th|_1 + lambda (M_pb |e'p - D| + M_r xi_r), in $/h.
template <class S>
S ssl_loss(std::span<const S> p, const EDInstance& inst, double lambda) {
  S loss = objective(inst, p);
  if (lambda != 0.0) loss = loss + hard_penalty(inst, p) * lambda;
  return loss;
}

// ---------------------------------------------------------------------------
// Optimizer.

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW: theta <- theta - lr * (wd * theta + m_hat / (sqrt(v_hat) + eps)).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double weight_decay);

// ---------------------------------------------------------------------------
// Trained model.

struct ProxyMeta {
  std::uint64_t seed = 0;
  std::string case_sha256;
  LossKind loss = LossKind::kSelfSupervised;
  double lambda = 0.0;
  double mu = 0.0;
  int epochs = 0;
  int best_epoch = 0;
  int dc3_test_steps = 200;
  double dc3_rho = 1e-4;
};

struct TrainedProxy {
  Arch arch = Arch::kE2elr;
  bool reserve_mode = false;
  MLPParams mlp;
  std::vector<double> norm_mean;
  std::vector<double> norm_scale;
  ProxyMeta meta;
};

inline constexpr int kCheckpointFormatVersion = 1;

std::string proxy_to_json(const TrainedProxy& proxy);
TrainedProxy proxy_from_json(const std::string& text);
void save_proxy(const std::filesystem::path& path, const TrainedProxy& proxy);
TrainedProxy load_proxy(const std::filesystem::path& path);

// Network input: d, plus R in reserve mode.
std::vector<double> raw_features(const Sample& sample, bool reserve_mode);
std::vector<double> normalized_features(const TrainedProxy& proxy, std::span<const double> d, double R);

// Deterministic inference (eval mode; DC3 uses its test-time step count).
std::vector<double> predict(const TrainedProxy& proxy, const EDInstance& inst);
std::vector<std::vector<double>> predict_batch(const TrainedProxy& proxy, std::span<const EDInstance> batch);

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  Arch arch = Arch::kE2elr;
  LossKind loss = LossKind::kSelfSupervised;
  double lambda = -1.0;   // < 0 selects the default for the loss kind
  double mu = -1.0;       // < 0 selects lambda for SL, 0 for SSL
  double lr = 1e-2;
  double lr_decay = 0.1;
  int lr_patience = 10;
  int early_stop_patience = 20;
  int max_epochs = 200;
  double max_seconds = 0.0;  // 0 disables the wall-clock budget
  std::size_t batch_size = 64;
  std::size_t eval_batch_size = 256;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 3;
  double dropout = 0.2;
  double weight_decay = 1e-6;
  int dc3_train_steps = 50;
  int dc3_test_steps = 200;
  double dc3_rho = 1e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool reserve_mode = false;

  // Lambda and mu after defaults and the E2ELR rule are applied.
  double effective_lambda() const;
  double effective_mu() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  TrainedProxy proxy;
  std::vector<EpochLog> log;
};

// Mean loss of a proxy over instances (eval mode), as used for validation.
double evaluate_loss(const TrainedProxy& proxy, std::span<const EDInstance> instances,
                     std::span<const Sample> samples, LossKind loss, double lambda, double mu);

TrainResult train(const TrainConfig& config, const EDNetwork& network, const DatasetSplits& data);

std::string log_to_csv(const std::vector<EpochLog>& log);

}  // namespace e2elr
