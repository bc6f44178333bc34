#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every operation in creation order; each node stores its
// value and the local partial derivatives with respect to its parents.
// backward() sweeps the tape once in reverse. Multi-output blocks with a
// hand-written vector-Jacobian product (the repair layers) are recorded as
// custom nodes.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "e2elr/error.hpp"
#include "e2elr/scalar.hpp"

namespace e2elr::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  double value() const;
  double grad() const;
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

// Maps the cotangent of a block's outputs to the cotangent of its inputs.
using VjpFn = std::function<std::vector<double>(std::span<const double>)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value) { return push(value); }
  Var constant(double value) { return push(value); }

  std::size_t size() const { return value_.size(); }
  void reserve(std::size_t nodes, std::size_t edges);
  void clear();

  // Node with parents and local partials d(node)/d(parent).
  Var push(double value, std::span<const std::uint32_t> parents = {},
           std::span<const double> partials = {});
  Var push1(double value, std::uint32_t a, double da);
  Var push2(double value, std::uint32_t a, double da, std::uint32_t b, double db);

  // Records a block with the given inputs and output values. `vjp` is called
  // once during backward with the output cotangents.
  std::vector<Var> custom(std::span<const Var> inputs, std::span<const double> outputs, VjpFn vjp);

  // Reverse sweep from a scalar node. Throws UsageError on an empty tape or a
  // node from another tape.
  void backward(Var loss);

  bool has_gradients() const { return !grad_.empty(); }
  double grad(std::uint32_t index) const;
  double value(std::uint32_t index) const { return value_[index]; }

 private:
  struct Block {
    std::vector<std::uint32_t> inputs;
    std::uint32_t first_output;
    std::uint32_t count;
    VjpFn vjp;
  };

  std::vector<double> value_;
  std::vector<std::uint32_t> edge_begin_;
  std::vector<std::uint32_t> edge_count_;
  std::vector<std::int32_t> block_;  // -1, or block id on the first output
  std::vector<std::uint32_t> parent_;
  std::vector<double> partial_;
  std::vector<Block> blocks_;
  std::vector<double> grad_;
};

inline double Var::value() const { return tape_->value(index_); }
inline double Var::grad() const {
  if (tape_ == nullptr) throw UsageError("gradient of an unbound variable");
  return tape_->grad(index_);
}

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);

Var pos(Var x);
Var relu(Var x);
Var min_const(Var x, double c);
Var abs_value(Var x);
Var sigmoid(Var x);
Var square(Var x);
Var sqrt(Var x);
Var exp(Var x);
Var log(Var x);

Var sum(std::span<const Var> xs);
Var lincomb(std::span<const Var> xs, std::span<const double> weights, double constant);
// constant + sum_i a_i b_i
Var dot(std::span<const Var> a, std::span<const Var> b, Var constant);

inline Var constant_like(Var like, double value) { return like.tape()->constant(value); }
inline double value_of(Var x) { return x.value(); }

std::vector<double> values(std::span<const Var> xs);

}  // namespace e2elr::ad
