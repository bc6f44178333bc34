#include "e2elr/autodiff.hpp"

#include <cmath>
#include <string>

namespace e2elr::ad {

namespace {

Tape* common_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw UsageError("operands belong to different tapes");
  }
  return a.tape();
}

Tape* tape_of(Var a) {
  if (a.tape() == nullptr) throw UsageError("variable is not bound to a tape");
  return a.tape();
}

}  // namespace

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  value_.reserve(nodes);
  edge_begin_.reserve(nodes);
  edge_count_.reserve(nodes);
  block_.reserve(nodes);
  parent_.reserve(edges);
  partial_.reserve(edges);
}

void Tape::clear() {
  value_.clear();
  edge_begin_.clear();
  edge_count_.clear();
  block_.clear();
  parent_.clear();
  partial_.clear();
  blocks_.clear();
  grad_.clear();
}

Var Tape::push(double value, std::span<const std::uint32_t> parents, std::span<const double> partials) {
  const auto index = static_cast<std::uint32_t>(value_.size());
  value_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parent_.size()));
  edge_count_.push_back(static_cast<std::uint32_t>(parents.size()));
  block_.push_back(-1);
  parent_.insert(parent_.end(), parents.begin(), parents.end());
  partial_.insert(partial_.end(), partials.begin(), partials.end());
  return {this, index};
}

Var Tape::push1(double value, std::uint32_t a, double da) {
  const auto index = static_cast<std::uint32_t>(value_.size());
  value_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parent_.size()));
  edge_count_.push_back(1);
  block_.push_back(-1);
  parent_.push_back(a);
  partial_.push_back(da);
  return {this, index};
}

Var Tape::push2(double value, std::uint32_t a, double da, std::uint32_t b, double db) {
  const auto index = static_cast<std::uint32_t>(value_.size());
  value_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(parent_.size()));
  edge_count_.push_back(2);
  block_.push_back(-1);
  parent_.push_back(a);
  parent_.push_back(b);
  partial_.push_back(da);
  partial_.push_back(db);
  return {this, index};
}

std::vector<Var> Tape::custom(std::span<const Var> inputs, std::span<const double> outputs, VjpFn vjp) {
  Block block;
  block.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw UsageError("custom block input from another tape");
    block.inputs.push_back(v.index());
  }
  block.first_output = static_cast<std::uint32_t>(value_.size());
  block.count = static_cast<std::uint32_t>(outputs.size());
  block.vjp = std::move(vjp);
  std::vector<Var> out;
  out.reserve(outputs.size());
  for (double v : outputs) out.push_back(push(v));
  if (!outputs.empty()) {
    block_[block.first_output] = static_cast<std::int32_t>(blocks_.size());
    blocks_.push_back(std::move(block));
  }
  return out;
}

void Tape::backward(Var loss) {
  if (value_.empty()) throw UsageError("backward on an empty tape");
  if (loss.tape() != this || loss.index() >= value_.size()) {
    throw UsageError("loss node does not belong to this tape");
  }
  grad_.assign(value_.size(), 0.0);
  grad_[loss.index()] = 1.0;
  for (std::int64_t i = loss.index(); i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    if (block_[k] >= 0) {
      const Block& b = blocks_[static_cast<std::size_t>(block_[k])];
      const std::span<const double> out_grad(grad_.data() + b.first_output, b.count);
      bool any = false;
      for (double g : out_grad) any = any || g != 0.0;
      if (!any) continue;
      const std::vector<double> in_grad = b.vjp(out_grad);
      if (in_grad.size() != b.inputs.size()) {
        throw UsageError("custom block returned " + std::to_string(in_grad.size()) +
                         " input gradients, expected " + std::to_string(b.inputs.size()));
      }
      for (std::size_t j = 0; j < in_grad.size(); ++j) grad_[b.inputs[j]] += in_grad[j];
      continue;
    }
    const double g = grad_[k];
    if (g == 0.0) continue;
    const std::uint32_t begin = edge_begin_[k];
    const std::uint32_t end = begin + edge_count_[k];
    for (std::uint32_t e = begin; e < end; ++e) grad_[parent_[e]] += partial_[e] * g;
  }
}

double Tape::grad(std::uint32_t index) const {
  if (grad_.empty()) throw UsageError("gradients read before backward()");
  if (index >= grad_.size()) return 0.0;
  return grad_[index];
}

Var operator+(Var a, Var b) {
  Tape* t = common_tape(a, b);
  return t->push2(a.value() + b.value(), a.index(), 1.0, b.index(), 1.0);
}
Var operator-(Var a, Var b) {
  Tape* t = common_tape(a, b);
  return t->push2(a.value() - b.value(), a.index(), 1.0, b.index(), -1.0);
}
Var operator*(Var a, Var b) {
  Tape* t = common_tape(a, b);
  return t->push2(a.value() * b.value(), a.index(), b.value(), b.index(), a.value());
}
Var operator/(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const double inv = 1.0 / b.value();
  return t->push2(a.value() * inv, a.index(), inv, b.index(), -a.value() * inv * inv);
}
Var operator-(Var a) { return tape_of(a)->push1(-a.value(), a.index(), -1.0); }
Var operator+(Var a, double b) { return tape_of(a)->push1(a.value() + b, a.index(), 1.0); }
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, double b) { return tape_of(a)->push1(a.value() - b, a.index(), 1.0); }
Var operator-(double a, Var b) { return tape_of(b)->push1(a - b.value(), b.index(), -1.0); }
Var operator*(Var a, double b) { return tape_of(a)->push1(a.value() * b, a.index(), b); }
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, double b) { return tape_of(a)->push1(a.value() / b, a.index(), 1.0 / b); }
Var operator/(double a, Var b) {
  const double inv = 1.0 / b.value();
  return tape_of(b)->push1(a * inv, b.index(), -a * inv * inv);
}

Var pos(Var x) {
  const double v = x.value();
  return tape_of(x)->push1(v > 0.0 ? v : 0.0, x.index(), v > 0.0 ? 1.0 : 0.0);
}
Var relu(Var x) { return pos(x); }
Var min_const(Var x, double c) {
  const double v = x.value();
  return tape_of(x)->push1(v < c ? v : c, x.index(), v < c ? 1.0 : 0.0);
}
Var abs_value(Var x) {
  const double v = x.value();
  return tape_of(x)->push1(std::abs(v), x.index(), v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0);
}
Var sigmoid(Var x) {
  const double s = e2elr::sigmoid(x.value());
  return tape_of(x)->push1(s, x.index(), s * (1.0 - s));
}
Var square(Var x) {
  const double v = x.value();
  return tape_of(x)->push1(v * v, x.index(), 2.0 * v);
}
Var sqrt(Var x) {
  const double s = std::sqrt(x.value());
  return tape_of(x)->push1(s, x.index(), 0.5 / s);
}
Var exp(Var x) {
  const double e = std::exp(x.value());
  return tape_of(x)->push1(e, x.index(), e);
}
Var log(Var x) {
  const double v = x.value();
  return tape_of(x)->push1(std::log(v), x.index(), 1.0 / v);
}

Var sum(std::span<const Var> xs) {
  if (xs.empty()) throw UsageError("sum of an empty span has no tape");
  Tape* t = tape_of(xs[0]);
  std::vector<std::uint32_t> parents(xs.size());
  std::vector<double> partials(xs.size(), 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].tape() != t) throw UsageError("operands belong to different tapes");
    parents[i] = xs[i].index();
    acc += xs[i].value();
  }
  return t->push(acc, parents, partials);
}

Var lincomb(std::span<const Var> xs, std::span<const double> weights, double constant) {
  if (xs.empty()) throw UsageError("lincomb of an empty span has no tape");
  Tape* t = tape_of(xs[0]);
  std::vector<std::uint32_t> parents(xs.size());
  double acc = constant;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].tape() != t) throw UsageError("operands belong to different tapes");
    parents[i] = xs[i].index();
    acc += weights[i] * xs[i].value();
  }
  return t->push(acc, parents, weights.first(xs.size()));
}

Var dot(std::span<const Var> a, std::span<const Var> b, Var constant) {
  Tape* t = tape_of(constant);
  const std::size_t n = a.size();
  std::vector<std::uint32_t> parents(2 * n + 1);
  std::vector<double> partials(2 * n + 1);
  double acc = constant.value();
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].tape() != t || b[i].tape() != t) throw UsageError("operands belong to different tapes");
    const double av = a[i].value();
    const double bv = b[i].value();
    acc += av * bv;
    parents[2 * i] = a[i].index();
    partials[2 * i] = bv;
    parents[2 * i + 1] = b[i].index();
    partials[2 * i + 1] = av;
  }
  parents[2 * n] = constant.index();
  partials[2 * n] = 1.0;
  return t->push(acc, parents, partials);
}

std::vector<double> values(std::span<const Var> xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i].value();
  return out;
}

}  // namespace e2elr::ad
