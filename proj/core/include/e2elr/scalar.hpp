#pragma once

// Scalar primitives shared by the plain-double code paths and the autodiff
// tape. Generic code calls these unqualified; ad::Var provides overloads with
// the same names so one template serves both evaluation and training.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>

namespace e2elr {

inline double pos(double x) { return x > 0.0 ? x : 0.0; }

// min(x, c); ties resolve to the constant (zero derivative).
inline double min_const(double x, double c) { return x < c ? x : c; }

inline double abs_value(double x) { return std::abs(x); }

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sum(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0);
}

// constant + sum_i weights[i] * xs[i]
inline double lincomb(std::span<const double> xs, std::span<const double> weights,
                      double constant) {
  double acc = constant;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += weights[i] * xs[i];
  return acc;
}

inline double square(double x) { return x * x; }

// constant + sum_i a[i] * b[i]
inline double dot(std::span<const double> a, std::span<const double> b, double constant) {
  double acc = constant;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double constant_like(double, double value) { return value; }

inline double value_of(double x) { return x; }

}  // namespace e2elr
