#include "e2elr/mlp.hpp"

#include <cmath>

namespace e2elr {

namespace {

MLPParams layout(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers,
                 std::size_t output_dim) {
  if (num_layers < 1) throw ContractError("an MLP needs at least one layer");
  if (input_dim == 0 || output_dim == 0 || (num_layers > 1 && hidden_dim == 0)) {
    throw ContractError("MLP dimensions must be positive");
  }
  MLPParams p;
  std::size_t offset = 0;
  std::size_t in = input_dim;
  for (std::size_t k = 0; k < num_layers; ++k) {
    const std::size_t out = k + 1 == num_layers ? output_dim : hidden_dim;
    LayerShape L{in, out, offset, offset + in * out};
    offset += in * out + out;
    p.layers.push_back(L);
    if (k + 1 < num_layers) {
      p.bn_mean.emplace_back(out, 0.0);
      p.bn_var.emplace_back(out, 1.0);
    }
    in = out;
  }
  p.theta.assign(offset, 0.0);
  return p;
}

}  // namespace

MLPParams zero_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers,
                   std::size_t output_dim) {
  return layout(input_dim, hidden_dim, num_layers, output_dim);
}

MLPParams init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers,
                   std::size_t output_dim, Rng& rng, double dropout) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
  MLPParams p = layout(input_dim, hidden_dim, num_layers, output_dim);
  p.dropout = dropout;
  for (const LayerShape& L : p.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
    for (std::size_t i = 0; i < L.in * L.out; ++i) p.theta[L.w_offset + i] = rng.uniform(-a, a);
  }
  return p;
}

std::vector<double> forward_mlp(const MLPParams& params, std::span<const double> input) {
  const std::vector<std::vector<double>> batch{std::vector<double>(input.begin(), input.end())};
  return mlp_forward<double>(params, params.theta, batch, ForwardMode{}).front();
}

void update_running_stats(MLPParams& params, const std::vector<BatchStats>& stats, std::size_t batch) {
  const double m = params.bn_momentum;
  const double unbias = batch > 1 ? static_cast<double>(batch) / static_cast<double>(batch - 1) : 1.0;
  for (std::size_t k = 0; k < stats.size() && k < params.bn_mean.size(); ++k) {
    for (std::size_t j = 0; j < stats[k].mean.size(); ++j) {
      params.bn_mean[k][j] = (1.0 - m) * params.bn_mean[k][j] + m * stats[k].mean[j];
      params.bn_var[k][j] = (1.0 - m) * params.bn_var[k][j] + m * stats[k].var[j] * unbias;
    }
  }
}

}  // namespace e2elr
