#include "e2elr/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

namespace e2elr {

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::kDnn: return "dnn";
    case Arch::kDeepOpf: return "deepopf";
    case Arch::kDc3: return "dc3";
    case Arch::kE2elr: return "e2elr";
  }
  return "unknown";
}

std::string to_string(LossKind loss) { return loss == LossKind::kSupervised ? "sl" : "ssl"; }

Arch parse_arch(const std::string& text) {
  if (text == "dnn") return Arch::kDnn;
  if (text == "deepopf") return Arch::kDeepOpf;
  if (text == "dc3") return Arch::kDc3;
  if (text == "e2elr") return Arch::kE2elr;
  throw UsageError("unknown architecture '" + text + "'");
}

LossKind parse_loss(const std::string& text) {
  if (text == "sl") return LossKind::kSupervised;
  if (text == "ssl") return LossKind::kSelfSupervised;
  throw UsageError("unknown loss kind '" + text + "'");
}

std::size_t output_width(Arch arch, std::size_t num_generators) {
  if (arch == Arch::kDeepOpf || arch == Arch::kDc3) {
    if (num_generators < 2) throw ContractError("DeepOPF and DC3 need at least two generators");
    return num_generators - 1;
  }
  return num_generators;
}

// ---------------------------------------------------------------------------

std::vector<double> balance_layer(std::span<const double> p, const RepairContext& ctx) {
  return power_balance_repair(p, ctx).p;
}

std::vector<ad::Var> balance_layer(std::span<const ad::Var> p, const RepairContext& ctx) {
  if (p.empty()) return {};
  BalanceResult r = power_balance_repair(ad::values(p), ctx);
  auto handle = std::make_shared<const BalanceHandle>(std::move(r.handle));
  return p[0].tape()->custom(p, r.p, [handle](std::span<const double> u) { return power_balance_vjp(*handle, u); });
}

std::vector<double> reserve_layer(std::span<const double> p, const RepairContext& ctx) {
  return reserve_repair(p, ctx).p;
}

std::vector<ad::Var> reserve_layer(std::span<const ad::Var> p, const RepairContext& ctx) {
  if (p.empty()) return {};
  ReserveResult r = reserve_repair(ad::values(p), ctx);
  auto handle = std::make_shared<const ReserveHandle>(std::move(r.handle));
  return p[0].tape()->custom(p, r.p, [handle](std::span<const double> u) { return reserve_repair_vjp(*handle, u); });
}

// ---------------------------------------------------------------------------

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s, double lr,
               double weight_decay) {
  if (params.size() != grads.size()) throw ContractError("gradient and parameter lengths differ");
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ContractError("optimizer state does not match the parameters");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= lr * (weight_decay * params[i] + m_hat / (std::sqrt(v_hat) + s.eps));
  }
}

// ---------------------------------------------------------------------------

std::vector<double> raw_features(const Sample& sample, bool reserve_mode) {
  std::vector<double> x = sample.d;
  if (reserve_mode) x.push_back(sample.R);
  return x;
}

std::vector<double> normalized_features(const TrainedProxy& proxy, std::span<const double> d, double R) {
  std::vector<double> x(d.begin(), d.end());
  if (proxy.reserve_mode) x.push_back(R);
  if (x.size() != proxy.norm_mean.size()) throw ContractError("instance does not match the model input width");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - proxy.norm_mean[i]) / proxy.norm_scale[i];
  return x;
}

std::vector<double> predict(const TrainedProxy& proxy, const EDInstance& inst) {
  const std::vector<double> x = normalized_features(proxy, inst.d, inst.R);
  const std::vector<double> z = forward_mlp(proxy.mlp, x);
  const RepairContext ctx(inst);
  return dispatch_from_output<double>(proxy.arch, z, inst, ctx, proxy.reserve_mode, proxy.meta.dc3_test_steps,
                                      proxy.meta.dc3_rho);
}

std::vector<std::vector<double>> predict_batch(const TrainedProxy& proxy, std::span<const EDInstance> batch) {
  std::vector<std::vector<double>> inputs;
  inputs.reserve(batch.size());
  for (const EDInstance& inst : batch) inputs.push_back(normalized_features(proxy, inst.d, inst.R));
  const auto z = mlp_forward<double>(proxy.mlp, proxy.mlp.theta, inputs, ForwardMode{});
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const RepairContext ctx(batch[b]);
    out.push_back(dispatch_from_output<double>(proxy.arch, z[b], batch[b], ctx, proxy.reserve_mode,
                                               proxy.meta.dc3_test_steps, proxy.meta.dc3_rho));
  }
  return out;
}

// ---------------------------------------------------------------------------

double TrainConfig::effective_lambda() const {
  if (arch == Arch::kE2elr) return 0.0;
  if (lambda >= 0.0) return lambda;
  return loss == LossKind::kSelfSupervised ? 0.5 : 1e-4;
}

double TrainConfig::effective_mu() const {
  if (mu >= 0.0) return mu;
  return loss == LossKind::kSupervised ? 1e-4 : 0.0;
}

namespace {

template <class S>
S instance_loss(std::span<const S> p, const EDInstance& inst, const Sample& sample, LossKind loss, double lambda,
                double mu) {
  if (loss == LossKind::kSupervised) {
    if (!sample.solution) throw ValidationError("supervised loss needs labeled instances");
    return sl_loss(p, std::span<const double>(sample.solution->p), inst, lambda, mu);
  }
  return ssl_loss(p, inst, lambda);
}

void check_labels(const std::vector<Sample>& samples, const char* split) {
  for (const Sample& s : samples) {
    if (!s.solution) throw ValidationError(std::string(split) + " split has unlabeled instances");
  }
}

}  // namespace

double evaluate_loss(const TrainedProxy& proxy, std::span<const EDInstance> instances, std::span<const Sample> samples,
                     LossKind loss, double lambda, double mu) {
  if (instances.empty()) throw ValidationError("cannot evaluate on an empty split");
  const auto preds = predict_batch(proxy, instances);
  double total = 0.0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    total += instance_loss<double>(preds[i], instances[i], samples[i], loss, lambda, mu);
  }
  return total / static_cast<double>(instances.size());
}

TrainResult train(const TrainConfig& config, const EDNetwork& network, const DatasetSplits& data) {
  if (data.train.empty()) throw ValidationError("training split is empty");
  if (data.val.empty()) throw ValidationError("validation split is empty");
  if (config.batch_size == 0 || config.eval_batch_size == 0) throw ValidationError("batch sizes must be >= 1");
  if (config.dc3_rho <= 0.0) throw ValidationError("DC3 step size must be positive");
  if (config.loss == LossKind::kSupervised) {
    check_labels(data.train, "training");
    check_labels(data.val, "validation");
  }
  const double lambda = config.effective_lambda();
  const double mu = config.effective_mu();
  const auto start = std::chrono::steady_clock::now();

  auto build = [&](const std::vector<Sample>& samples) {
    std::vector<EDInstance> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) out.push_back(network.instance(s.d, s.R));
    return out;
  };
  const std::vector<EDInstance> train_inst = build(data.train);
  const std::vector<EDInstance> val_inst = build(data.val);
  std::vector<RepairContext> train_ctx;
  train_ctx.reserve(train_inst.size());
  for (const EDInstance& inst : train_inst) train_ctx.emplace_back(inst);

  const std::size_t G = network.system().num_generators();
  TrainedProxy proxy;
  proxy.arch = config.arch;
  proxy.reserve_mode = config.reserve_mode;

  // Input normalization from the training split.
  const std::size_t width = raw_features(data.train.front(), config.reserve_mode).size();
  proxy.norm_mean.assign(width, 0.0);
  proxy.norm_scale.assign(width, 0.0);
  for (const Sample& s : data.train) {
    const auto x = raw_features(s, config.reserve_mode);
    for (std::size_t i = 0; i < width; ++i) proxy.norm_mean[i] += x[i];
  }
  for (double& m : proxy.norm_mean) m /= static_cast<double>(data.train.size());
  for (const Sample& s : data.train) {
    const auto x = raw_features(s, config.reserve_mode);
    for (std::size_t i = 0; i < width; ++i) proxy.norm_scale[i] += square(x[i] - proxy.norm_mean[i]);
  }
  for (std::size_t i = 0; i < width; ++i) {
    const double sd = std::sqrt(proxy.norm_scale[i] / static_cast<double>(data.train.size()));
    proxy.norm_scale[i] = sd > 1e-12 * std::max(1.0, std::abs(proxy.norm_mean[i])) ? sd : 1.0;
  }
  std::vector<std::vector<double>> train_x;
  train_x.reserve(data.train.size());
  for (const Sample& s : data.train) train_x.push_back(normalized_features(proxy, s.d, s.R));

  Rng init_rng = Rng::stream(config.seed, 1);
  Rng dropout_rng = Rng::stream(config.seed, 2);
  Rng shuffle_rng = Rng::stream(config.seed, 3);
  proxy.mlp = init_mlp(width, config.hidden_dim, config.num_layers, output_width(config.arch, G), init_rng,
                       config.dropout);
  proxy.meta.seed = config.seed;
  proxy.meta.case_sha256 = case_sha256(network.system());
  proxy.meta.loss = config.loss;
  proxy.meta.lambda = lambda;
  proxy.meta.mu = mu;
  proxy.meta.dc3_test_steps = config.dc3_test_steps;
  proxy.meta.dc3_rho = config.dc3_rho;

  TrainResult result;
  TrainedProxy best = proxy;
  double best_val = std::numeric_limits<double>::infinity();
  int stagnant_lr = 0;
  int stagnant_stop = 0;
  double lr = config.lr;
  AdamState adam;
  ad::Tape tape;
  std::vector<std::size_t> order(train_inst.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grads(proxy.mlp.theta.size());

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::size_t B = end - begin;
      tape.clear();
      std::vector<ad::Var> theta;
      theta.reserve(proxy.mlp.theta.size());
      for (double v : proxy.mlp.theta) theta.push_back(tape.variable(v));
      std::vector<std::vector<ad::Var>> inputs(B);
      for (std::size_t b = 0; b < B; ++b) {
        for (double v : train_x[order[begin + b]]) inputs[b].push_back(tape.constant(v));
      }
      std::vector<BatchStats> stats;
      ForwardMode mode{true, &dropout_rng, &stats};
      const auto z = mlp_forward<ad::Var>(proxy.mlp, theta, inputs, mode);
      std::vector<ad::Var> losses;
      losses.reserve(B);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t i = order[begin + b];
        const auto p = dispatch_from_output<ad::Var>(config.arch, z[b], train_inst[i], train_ctx[i],
                                                     config.reserve_mode, config.dc3_train_steps, config.dc3_rho);
        losses.push_back(instance_loss<ad::Var>(p, train_inst[i], data.train[i], config.loss, lambda, mu));
      }
      const ad::Var batch_loss = ad::sum(losses) * (1.0 / static_cast<double>(B));
      tape.backward(batch_loss);
      for (std::size_t k = 0; k < theta.size(); ++k) grads[k] = theta[k].grad();
      adam_step(proxy.mlp.theta, grads, adam, lr, config.weight_decay);
      update_running_stats(proxy.mlp, stats, B);
      loss_sum += batch_loss.value() * static_cast<double>(B);
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.val_loss = evaluate_loss(proxy, val_inst, data.val, config.loss, lambda, mu);
    row.lr = lr;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);

    if (row.val_loss < best_val) {
      best_val = row.val_loss;
      best = proxy;
      best.meta.best_epoch = epoch;
      stagnant_lr = 0;
      stagnant_stop = 0;
    } else {
      ++stagnant_lr;
      ++stagnant_stop;
      if (stagnant_lr >= config.lr_patience) {
        lr *= config.lr_decay;
        stagnant_lr = 0;
      }
      if (stagnant_stop >= config.early_stop_patience) break;
    }
    if (config.max_seconds > 0.0 && row.seconds >= config.max_seconds) break;
  }
  best.meta.epochs = static_cast<int>(result.log.size());
  result.proxy = std::move(best);
  return result;
}

std::string log_to_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[160];
  for (const EpochLog& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.6f\n", row.epoch, row.train_loss, row.val_loss, row.lr,
                  row.seconds);
    out += buf;
  }
  return out;
}

}  // namespace e2elr
