#include "epinuts/tape.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "epinuts/error.hpp"
#include "epinuts/special.hpp"

namespace epinuts::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Subtract: return "subtract";
    case OpKind::Multiply: return "multiply";
    case OpKind::Divide: return "divide";
    case OpKind::Negate: return "negate";
    case OpKind::Shift: return "shift";
    case OpKind::SubtractFrom: return "subtract-from";
    case OpKind::Scale: return "scale";
    case OpKind::ScaledInverse: return "scaled-inverse";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Log1p: return "log1p";
    case OpKind::Lgamma: return "lgamma";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::PowConst: return "pow";
    case OpKind::Sum: return "sum";
    case OpKind::Dot: return "dot";
    case OpKind::WeightedSum: return "weighted-sum";
    case OpKind::WindowSum: return "window-sum";
    case OpKind::SeriesPush: return "series-push";
    case OpKind::Select: return "select";
    case OpKind::Precomputed: return "precomputed";
  }
  return "unknown";
}

namespace {

[[noreturn]] void domain_failure(OpKind kind, double x) {
  throw DomainError(std::string(op_name(kind)), x);
}

}  // namespace

Var Tape::make_input(double value) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({OpKind::Input, static_cast<std::uint32_t>(operands_.size()), 0, 0, 0.0});
  values_.push_back(value);
  inputs_.push_back(index);
  return {this, index, value};
}

Var Tape::constant(double value) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({OpKind::Constant, static_cast<std::uint32_t>(operands_.size()), 0, 0, value});
  values_.push_back(value);
  return {this, index, value};
}

void Tape::clear() {
  nodes_.clear();
  values_.clear();
  operands_.clear();
  partials_.clear();
  inputs_.clear();
  series_values_.clear();
  weight_pool_.clear();
}

void Tape::owner_failure() { throw UsageError("variable was not recorded on this tape"); }

double Tape::value(const Var& v) const {
  check_owner(v);
  return values_[v.index];
}

Var Tape::record(OpKind kind, std::span<const std::uint32_t> operands, double param) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  const auto first = static_cast<std::uint32_t>(operands_.size());
  for (std::uint32_t op : operands) {
    operands_.push_back(op);
    partials_.push_back(0.0);
  }
  nodes_.push_back({kind, first, static_cast<std::uint32_t>(operands.size()), 0, param});
  values_.push_back(0.0);
  try {
    evaluate(index);
  } catch (...) {
    nodes_.pop_back();
    values_.pop_back();
    operands_.resize(first);
    partials_.resize(first);
    throw;
  }
  return {this, index, values_[index]};
}

Var Tape::record_weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw UsageError("weighted sum: length mismatch");
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  const auto first = static_cast<std::uint32_t>(operands_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_owner(xs[i]);
    operands_.push_back(xs[i].index);
    partials_.push_back(weights[i]);
    acc += weights[i] * xs[i].value;
  }
  nodes_.push_back({OpKind::WeightedSum, first, static_cast<std::uint32_t>(xs.size()), 0, 0.0});
  values_.push_back(acc);
  return {this, index, acc};
}

Var Tape::push_unary(OpKind kind, const Var& x, double param, double value, double partial) {
  check_owner(x);
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({kind, static_cast<std::uint32_t>(operands_.size()), 1, 0, param});
  operands_.push_back(x.index);
  partials_.push_back(partial);
  values_.push_back(value);
  return {this, index, value};
}

Var Tape::push_binary(OpKind kind, const Var& a, const Var& b, double value, double pa, double pb) {
  check_owner(a);
  check_owner(b);
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({kind, static_cast<std::uint32_t>(operands_.size()), 2, 0, 0.0});
  operands_.push_back(a.index);
  operands_.push_back(b.index);
  partials_.push_back(pa);
  partials_.push_back(pb);
  values_.push_back(value);
  return {this, index, value};
}

Var Tape::record_precomputed(double value, std::span<const Var> xs, std::span<const double> partials) {
  if (xs.size() != partials.size()) throw UsageError("precomputed node: length mismatch");
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  const auto first = static_cast<std::uint32_t>(operands_.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_owner(xs[i]);
    operands_.push_back(xs[i].index);
    partials_.push_back(partials[i]);
  }
  nodes_.push_back({OpKind::Precomputed, first, static_cast<std::uint32_t>(xs.size()), 0, value});
  values_.push_back(value);
  return {this, index, value};
}

std::uint32_t Tape::intern_weights(std::span<const double> weights) {
  const auto first = static_cast<std::uint32_t>(weight_pool_.size());
  weight_pool_.insert(weight_pool_.end(), weights.begin(), weights.end());
  return first;
}

void Tape::series_push(const Var& v) {
  check_owner(v);
  const auto slot = static_cast<std::uint32_t>(series_values_.size());
  nodes_.push_back({OpKind::SeriesPush, static_cast<std::uint32_t>(operands_.size()), 1, slot, 0.0});
  operands_.push_back(v.index);
  partials_.push_back(1.0);
  values_.push_back(v.value);
  series_values_.push_back(v.value);
}

Var Tape::window_sum(std::uint32_t series_first, std::uint32_t count, std::uint32_t weights_first) {
  if (static_cast<std::size_t>(series_first) + count > series_values_.size() ||
      static_cast<std::size_t>(weights_first) + count > weight_pool_.size()) {
    throw UsageError("window sum outside the series or weight pool");
  }
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({OpKind::WindowSum, series_first, count, weights_first, 0.0});
  values_.push_back(0.0);
  evaluate(index);
  return {this, index, values_[index]};
}

// Computes value and local partials of node i from its operands' values.
void Tape::evaluate(std::size_t i) {
  const Node& n = nodes_[i];
  const std::uint32_t* op = operands_.data() + n.first;
  double* dp = partials_.data() + n.first;
  auto in = [&](std::size_t j) { return values_[op[j]]; };
  double& out = values_[i];

  switch (n.kind) {
    case OpKind::Input:
      return;
    case OpKind::Constant:
      out = n.param;
      return;
    case OpKind::Add:
      out = in(0) + in(1);
      dp[0] = 1.0;
      dp[1] = 1.0;
      return;
    case OpKind::Subtract:
      out = in(0) - in(1);
      dp[0] = 1.0;
      dp[1] = -1.0;
      return;
    case OpKind::Multiply:
      out = in(0) * in(1);
      dp[0] = in(1);
      dp[1] = in(0);
      return;
    case OpKind::Divide: {
      const double b = in(1);
      if (b == 0.0) domain_failure(n.kind, b);
      out = in(0) / b;
      dp[0] = 1.0 / b;
      dp[1] = -out / b;
      return;
    }
    case OpKind::Negate:
      out = -in(0);
      dp[0] = -1.0;
      return;
    case OpKind::Shift:
      out = in(0) + n.param;
      dp[0] = 1.0;
      return;
    case OpKind::SubtractFrom:
      out = n.param - in(0);
      dp[0] = -1.0;
      return;
    case OpKind::Scale:
      out = in(0) * n.param;
      dp[0] = n.param;
      return;
    case OpKind::ScaledInverse: {
      const double x = in(0);
      if (x == 0.0) domain_failure(OpKind::Divide, x);
      out = n.param / x;
      dp[0] = -out / x;
      return;
    }
    case OpKind::Exp:
      out = std::exp(in(0));
      dp[0] = out;
      return;
    case OpKind::Log: {
      const double x = in(0);
      if (!(x > 0.0)) domain_failure(n.kind, x);
      out = std::log(x);
      dp[0] = 1.0 / x;
      return;
    }
    case OpKind::Log1p: {
      const double x = in(0);
      if (!(x > -1.0)) domain_failure(n.kind, x);
      out = std::log1p(x);
      dp[0] = 1.0 / (1.0 + x);
      return;
    }
    case OpKind::Lgamma: {
      const double x = in(0);
      if (!(x > 0.0)) domain_failure(n.kind, x);
      out = epinuts::lgamma(x);
      dp[0] = epinuts::digamma(x);
      return;
    }
    case OpKind::Square:
      out = in(0) * in(0);
      dp[0] = 2.0 * in(0);
      return;
    case OpKind::Sqrt: {
      const double x = in(0);
      if (!(x >= 0.0)) domain_failure(n.kind, x);
      out = std::sqrt(x);
      dp[0] = 0.5 / out;
      return;
    }
    case OpKind::PowConst: {
      const double x = in(0);
      out = std::pow(x, n.param);
      dp[0] = n.param * std::pow(x, n.param - 1.0);
      return;
    }
    case OpKind::Sum: {
      double acc = 0.0;
      for (std::uint32_t j = 0; j < n.count; ++j) {
        acc += in(j);
        dp[j] = 1.0;
      }
      out = acc;
      return;
    }
    case OpKind::Dot: {
      // Operands are laid out as x_0..x_{h-1}, y_0..y_{h-1}.
      const std::uint32_t h = n.count / 2;
      double acc = 0.0;
      for (std::uint32_t j = 0; j < h; ++j) {
        acc += in(j) * in(h + j);
        dp[j] = in(h + j);
        dp[h + j] = in(j);
      }
      out = acc;
      return;
    }
    case OpKind::WeightedSum: {
      double acc = 0.0;
      for (std::uint32_t j = 0; j < n.count; ++j) acc += dp[j] * in(j);
      out = acc;
      return;
    }
    case OpKind::WindowSum:
      out = weighted_dot(weight_pool_.data() + n.aux, series_values_.data() + n.first, n.count);
      return;
    case OpKind::SeriesPush:
      out = in(0);
      series_values_[n.aux] = out;
      dp[0] = 1.0;
      return;
    case OpKind::Select: {
      const bool first = n.param != 0.0;
      out = first ? in(0) : in(1);
      dp[0] = first ? 1.0 : 0.0;
      dp[1] = first ? 0.0 : 1.0;
      return;
    }
    case OpKind::Precomputed:
      throw UsageError("a precomputed node cannot be re-evaluated");
  }
}

std::vector<double> Tape::gradient(const Var& output) {
  std::vector<double> out(inputs_.size());
  gradient(output, out);
  return out;
}

void Tape::gradient(const Var& output, std::span<double> out) {
  check_owner(output);
  if (out.size() != inputs_.size()) throw UsageError("gradient buffer has wrong length");
  adjoints_.assign(output.index + 1, 0.0);
  adjoints_[output.index] = 1.0;
  series_adjoints_.assign(series_values_.size(), 0.0);
  for (std::size_t i = output.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    double a = adjoints_[i];
    // Window sums accumulate into the series pool; each slot is flushed to
    // its source variable at the push node, after every reader is done.
    if (n.kind == OpKind::SeriesPush) a += series_adjoints_[n.aux];
    if (a == 0.0) continue;
    if (n.kind == OpKind::WindowSum) {
      double* adj = series_adjoints_.data() + n.first;
      const double* w = weight_pool_.data() + n.aux;
      for (std::uint32_t j = 0; j < n.count; ++j) adj[j] += a * w[j];
      continue;
    }
    const std::uint32_t* op = operands_.data() + n.first;
    const double* dp = partials_.data() + n.first;
    for (std::uint32_t j = 0; j < n.count; ++j) adjoints_[op[j]] += a * dp[j];
  }
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    out[k] = inputs_[k] <= output.index ? adjoints_[inputs_[k]] : 0.0;
  }
}

double Tape::replay(std::span<const double> inputs, const Var& output) {
  check_owner(output);
  if (inputs.size() != inputs_.size()) throw UsageError("replay: wrong number of inputs");
  for (std::size_t k = 0; k < inputs.size(); ++k) values_[inputs_[k]] = inputs[k];
  for (std::size_t i = 0; i < nodes_.size(); ++i) evaluate(i);
  return values_[output.index];
}

namespace {

Var unary(OpKind kind, const Var& x, double param = 0.0) {
  if (x.tape == nullptr) throw UsageError("variable has no tape");
  const std::array<std::uint32_t, 1> ops{x.index};
  return x.tape->record(kind, ops, param);
}

Var binary(OpKind kind, const Var& a, const Var& b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands live on different tapes");
  const std::array<std::uint32_t, 2> ops{a.index, b.index};
  return a.tape->record(kind, ops, 0.0);
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_binary(OpKind::Add, a, b, a.value + b.value, 1.0, 1.0);
}
Var operator-(const Var& a, const Var& b) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_binary(OpKind::Subtract, a, b, a.value - b.value, 1.0, -1.0);
}
Var operator*(const Var& a, const Var& b) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_binary(OpKind::Multiply, a, b, a.value * b.value, b.value, a.value);
}
Var operator/(const Var& a, const Var& b) { return binary(OpKind::Divide, a, b); }
Var operator-(const Var& a) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_unary(OpKind::Negate, a, 0.0, -a.value, -1.0);
}
Var operator+(const Var& a, double c) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_unary(OpKind::Shift, a, c, a.value + c, 1.0);
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_unary(OpKind::SubtractFrom, a, c, c - a.value, -1.0);
}
Var operator*(const Var& a, double c) {
  if (a.tape == nullptr) throw UsageError("variable has no tape");
  return a.tape->push_unary(OpKind::Scale, a, c, a.value * c, c);
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) {
  if (c == 0.0) throw DomainError("divide", c);
  return unary(OpKind::Scale, a, 1.0 / c);
}
Var operator/(double c, const Var& a) { return unary(OpKind::ScaledInverse, a, c); }
Var& operator+=(Var& a, const Var& b) { return a = a + b; }
Var& operator-=(Var& a, const Var& b) { return a = a - b; }
Var& operator*=(Var& a, const Var& b) { return a = a * b; }
Var& operator+=(Var& a, double c) { return a = a + c; }
Var& operator*=(Var& a, double c) { return a = a * c; }

Var exp(const Var& x) { return unary(OpKind::Exp, x); }
Var log(const Var& x) { return unary(OpKind::Log, x); }
Var log1p(const Var& x) { return unary(OpKind::Log1p, x); }
Var lgamma(const Var& x) { return unary(OpKind::Lgamma, x); }
Var square(const Var& x) { return unary(OpKind::Square, x); }
Var sqrt(const Var& x) { return unary(OpKind::Sqrt, x); }
Var pow(const Var& x, double c) { return unary(OpKind::PowConst, x, c); }

Var sum(std::span<const Var> xs) {
  if (xs.empty()) throw UsageError("sum of an empty sequence");
  Tape* tape = xs.front().tape;
  std::vector<std::uint32_t> ops;
  ops.reserve(xs.size());
  for (const Var& v : xs) {
    if (v.tape != tape) throw UsageError("operands live on different tapes");
    ops.push_back(v.index);
  }
  return tape->record(OpKind::Sum, ops, 0.0);
}

Var dot(std::span<const Var> xs, std::span<const Var> ys) {
  if (xs.empty() || xs.size() != ys.size()) throw UsageError("dot: length mismatch");
  Tape* tape = xs.front().tape;
  std::vector<std::uint32_t> ops;
  ops.reserve(2 * xs.size());
  for (const Var& v : xs) ops.push_back(v.index);
  for (const Var& v : ys) {
    if (v.tape != tape) throw UsageError("operands live on different tapes");
    ops.push_back(v.index);
  }
  return tape->record(OpKind::Dot, ops, 0.0);
}

Var dot(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.empty()) throw UsageError("dot of an empty sequence");
  return xs.front().tape->record_weighted_sum(xs, weights);
}

Var select(bool take_first, const Var& first, const Var& second) {
  if (first.tape == nullptr || first.tape != second.tape) {
    throw UsageError("operands live on different tapes");
  }
  const std::array<std::uint32_t, 2> ops{first.index, second.index};
  return first.tape->record(OpKind::Select, ops, take_first ? 1.0 : 0.0);
}

}  // namespace epinuts::ad

namespace epinuts {

void Series<ad::Var>::push(const ad::Var& x) {
  if (tape_ == nullptr) {
    if (x.tape == nullptr) throw UsageError("variable has no tape");
    tape_ = x.tape;
    series_first_ = tape_->series_size();
    weights_first_ = tape_->intern_weights(weights_);
  } else if (x.tape != tape_) {
    throw UsageError("series items live on different tapes");
  }
  if (tape_->series_size() != series_first_ + items_.size()) {
    throw UsageError("series pushes interleaved with another series on the same tape");
  }
  tape_->series_push(x);
  items_.push_back(x);
}

ad::Var Series<ad::Var>::window_sum(std::size_t first, std::size_t len, std::size_t w_first) {
  if (tape_ == nullptr) throw UsageError("window sum over an empty series");
  return tape_->window_sum(series_first_ + static_cast<std::uint32_t>(first), static_cast<std::uint32_t>(len),
                           weights_first_ + static_cast<std::uint32_t>(w_first));
}

}  // namespace epinuts
