#pragma once

// Fully connected proxy network.
//
// Hidden layer: Linear -> BatchNorm (no affine) -> ReLU -> Dropout.
// Output layer: Linear -> Sigmoid, so every output lies in (0, 1).
//
// Weights and biases live in one flat parameter vector `theta`; layer k owns
// the row-major block theta[w_offset, w_offset + out*in) and the bias block
// theta[b_offset, b_offset + out).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "e2elr/autodiff.hpp"
#include "e2elr/error.hpp"
#include "e2elr/rng.hpp"
#include "e2elr/scalar.hpp"

namespace e2elr {

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
};

struct MLPParams {
  std::vector<LayerShape> layers;
  std::vector<double> theta;
  // Running batch-norm statistics, one vector per hidden layer.
  std::vector<std::vector<double>> bn_mean;
  std::vector<std::vector<double>> bn_var;
  double dropout = 0.2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
};

// `num_layers` counts dense layers including the output layer (>= 1).
// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases 0.
MLPParams init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers,
                   std::size_t output_dim, Rng& rng, double dropout = 0.2);

// Same architecture with every parameter zero.
MLPParams zero_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_layers,
                   std::size_t output_dim);

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased, as used for normalization
};

struct ForwardMode {
  bool train = false;
  Rng* dropout_rng = nullptr;                 // required when train and dropout > 0
  std::vector<BatchStats>* batch_stats = nullptr;  // filled in train mode
};

// Forward pass over a batch of already normalized inputs. S is double or
// ad::Var; `theta` has the layout of params.theta. Train mode normalizes with
// batch statistics and samples dropout masks; eval mode uses running
// statistics and no dropout.
template <class S>
std::vector<std::vector<S>> mlp_forward(const MLPParams& params, std::span<const S> theta,
                                        const std::vector<std::vector<S>>& inputs, const ForwardMode& mode) {
  using std::sqrt;
  if (theta.size() != params.theta.size()) throw ContractError("parameter vector has the wrong length");
  const std::size_t batch = inputs.size();
  std::vector<std::vector<S>> x = inputs;
  for (const auto& row : x) {
    if (row.size() != params.input_dim()) throw ContractError("input has the wrong width");
  }
  if (mode.batch_stats) mode.batch_stats->clear();
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const LayerShape& L = params.layers[k];
    const bool hidden = k + 1 < params.layers.size();
    std::vector<std::vector<S>> h(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      h[b].reserve(L.out);
      for (std::size_t j = 0; j < L.out; ++j) {
        h[b].push_back(dot(theta.subspan(L.w_offset + j * L.in, L.in), std::span<const S>(x[b]),
                           theta[L.b_offset + j]));
      }
    }
    if (hidden) {
      if (mode.train) {
        BatchStats stats;
        stats.mean.resize(L.out);
        stats.var.resize(L.out);
        const double inv_b = 1.0 / static_cast<double>(batch);
        std::vector<S> column(batch);
        for (std::size_t j = 0; j < L.out; ++j) {
          for (std::size_t b = 0; b < batch; ++b) column[b] = h[b][j];
          const S mean = sum(std::span<const S>(column)) * inv_b;
          for (std::size_t b = 0; b < batch; ++b) column[b] = square(h[b][j] - mean);
          const S var = sum(std::span<const S>(column)) * inv_b;
          const S denom = sqrt(var + params.bn_eps);
          for (std::size_t b = 0; b < batch; ++b) h[b][j] = (h[b][j] - mean) / denom;
          stats.mean[j] = value_of(mean);
          stats.var[j] = value_of(var);
        }
        if (mode.batch_stats) mode.batch_stats->push_back(std::move(stats));
      } else {
        const auto& rm = params.bn_mean[k];
        const auto& rv = params.bn_var[k];
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t j = 0; j < L.out; ++j) {
            h[b][j] = (h[b][j] - rm[j]) * (1.0 / std::sqrt(rv[j] + params.bn_eps));
          }
        }
      }
      const bool drop = mode.train && params.dropout > 0.0;
      if (drop && mode.dropout_rng == nullptr) throw UsageError("train mode with dropout needs a generator");
      const double keep_scale = 1.0 / (1.0 - params.dropout);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < L.out; ++j) {
          h[b][j] = relu(h[b][j]);
          if (drop) h[b][j] = h[b][j] * (mode.dropout_rng->bernoulli(params.dropout) ? 0.0 : keep_scale);
        }
      }
    } else {
      for (auto& row : h) {
        for (auto& v : row) v = sigmoid(v);
      }
    }
    for (const auto& row : h) {
      for (const auto& v : row) {
        if (!std::isfinite(value_of(v))) {
          throw NumericalError("non-finite activation in layer " + std::to_string(k));
        }
      }
    }
    x = std::move(h);
  }
  return x;
}

// Eval-mode forward of one input.
std::vector<double> forward_mlp(const MLPParams& params, std::span<const double> input);

// Blends batch statistics into the running ones (momentum update, unbiased
// variance as in common frameworks).
void update_running_stats(MLPParams& params, const std::vector<BatchStats>& stats, std::size_t batch);

// z * p_max, elementwise.
template <class S>
std::vector<S> scale_to_bounds(std::span<const S> z, std::span<const double> p_max) {
  if (z.size() != p_max.size()) throw ContractError("z and p_max differ in length");
  std::vector<S> p;
  p.reserve(z.size());
  for (std::size_t g = 0; g < z.size(); ++g) p.push_back(z[g] * p_max[g]);
  return p;
}

}  // namespace e2elr
