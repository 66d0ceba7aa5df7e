#pragma once

// Reverse-mode automatic differentiation on an append-only tape.
//
// Every elementary operation appends one node holding its operand indices
// and local partial derivatives. A single reverse sweep accumulates
// adjoints. The tape keeps enough information (kind + constant parameter)
// to replay the forward pass on new input values without re-recording.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace epinuts::ad {

enum class OpKind : std::uint8_t {
  Input,
  Constant,
  Add,
  Subtract,
  Multiply,
  Divide,
  Negate,
  Shift,       // x + c
  SubtractFrom, // c - x
  Scale,       // x * c
  ScaledInverse,  // c / x
  Exp,
  Log,
  Log1p,
  Lgamma,
  Square,
  Sqrt,
  PowConst,    // x^c
  Sum,
  Dot,         // sum_i x_i * y_i, both sequences on tape
  WeightedSum, // sum_i w_i * x_i, constant weights
  WindowSum,   // weighted sum over a slice of a series, weights from a pool
  SeriesPush,  // copies its operand into the series pool
  Select,      // picks operand 0 or 1 by a mask fixed at record time
  Precomputed, // value and partials supplied by the caller; not replayable
};

std::string_view op_name(OpKind kind);

class Tape;

// A scalar recorded on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t index = 0;
  double value = 0.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var make_input(double value);
  Var constant(double value);

  // Drops all nodes but keeps allocated capacity.
  void clear();

  std::size_t size() const { return nodes_.size(); }
  std::size_t input_count() const { return inputs_.size(); }
  std::size_t operand_count() const { return operands_.size(); }

  // Reverse sweep. Returns d(output)/d(input_i) in input creation order.
  std::vector<double> gradient(const Var& output);
  void gradient(const Var& output, std::span<double> out);

  // Re-runs the recorded forward pass with new input values. Returns the
  // value of `output` after replay. The recorded structure (including
  // select masks) is reused verbatim.
  double replay(std::span<const double> inputs, const Var& output);

  double value(const Var& v) const;

  // Low-level recording entry point used by the operator overloads.
  Var record(OpKind kind, std::span<const std::uint32_t> operands, double param);
  Var record_weighted_sum(std::span<const Var> xs, std::span<const double> weights);
  // Recording without dispatch, for operations whose value and partials the
  // caller has already computed.
  Var push_unary(OpKind kind, const Var& x, double param, double value, double partial);
  Var push_binary(OpKind kind, const Var& a, const Var& b, double value, double pa, double pb);
  // A node whose value and local partials were computed outside the tape.
  Var record_precomputed(double value, std::span<const Var> xs, std::span<const double> partials);

  // Series support for discrete convolutions: variables appended to the
  // series pool and weights copied once into the weight pool can be summed
  // over any contiguous window without per-sum operand or weight lists.
  std::uint32_t intern_weights(std::span<const double> weights);
  std::uint32_t series_size() const { return static_cast<std::uint32_t>(series_values_.size()); }
  void series_push(const Var& v);
  // sum_j weights[weights_first + j] * series[series_first + j], j < count.
  Var window_sum(std::uint32_t series_first, std::uint32_t count, std::uint32_t weights_first);

 private:
  struct Node {
    OpKind kind;
    std::uint32_t first;  // offset into operands_/partials_ (series pool for WindowSum)
    std::uint32_t count;
    std::uint32_t aux;    // weight pool offset for WindowSum, series slot for SeriesPush
    double param;
  };

  void evaluate(std::size_t i);
  void check_owner(const Var& v) const {
    if (v.tape != this || v.index >= nodes_.size()) owner_failure();
  }
  [[noreturn]] static void owner_failure();

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<std::uint32_t> operands_;
  std::vector<double> partials_;
  std::vector<std::uint32_t> inputs_;
  std::vector<double> adjoints_;
  // Series values are kept contiguous so window sums are plain dot products.
  std::vector<double> series_values_;
  std::vector<double> series_adjoints_;
  std::vector<double> weight_pool_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);
Var& operator+=(Var& a, const Var& b);
Var& operator-=(Var& a, const Var& b);
Var& operator*=(Var& a, const Var& b);
Var& operator+=(Var& a, double c);
Var& operator*=(Var& a, double c);

Var exp(const Var& x);
Var log(const Var& x);
Var log1p(const Var& x);
Var lgamma(const Var& x);
Var square(const Var& x);
Var sqrt(const Var& x);
Var pow(const Var& x, double c);
Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> xs, std::span<const Var> ys);
Var dot(std::span<const Var> xs, std::span<const double> weights);
Var select(bool take_first, const Var& first, const Var& second);

}  // namespace epinuts::ad

namespace epinuts {

// A growing sequence x_0, x_1, ... with weighted sums over contiguous
// windows, weights taken from a fixed pool.
// sum_j w[j] * x[j] with four partial sums; shared by the double and tape
// paths so both produce bit-identical values.
inline double weighted_dot(const double* w, const double* x, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    a0 += w[j] * x[j];
    a1 += w[j + 1] * x[j + 1];
    a2 += w[j + 2] * x[j + 2];
    a3 += w[j + 3] * x[j + 3];
  }
  for (; j < n; ++j) a0 += w[j] * x[j];
  return (a0 + a1) + (a2 + a3);
}

template <class T>
class Series {
 public:
  explicit Series(std::span<const double> weights) : weights_(weights) {}

  void push(const T& x) { items_.push_back(x); }
  std::size_t size() const { return items_.size(); }
  const T& operator[](std::size_t i) const { return items_[i]; }
  const T& back() const { return items_.back(); }
  std::vector<T> take() { return std::move(items_); }

  // sum_{j < len} weights[w_first + j] * x[first + j]
  T window_sum(std::size_t first, std::size_t len, std::size_t w_first) const {
    return weighted_dot(weights_.data() + w_first, items_.data() + first, len);
  }

 private:
  std::span<const double> weights_;
  std::vector<T> items_;
};

template <>
class Series<ad::Var> {
 public:
  explicit Series(std::span<const double> weights) : weights_(weights) {}

  void push(const ad::Var& x);
  std::size_t size() const { return items_.size(); }
  const ad::Var& operator[](std::size_t i) const { return items_[i]; }
  const ad::Var& back() const { return items_.back(); }
  std::vector<ad::Var> take() { return std::move(items_); }

  ad::Var window_sum(std::size_t first, std::size_t len, std::size_t w_first);

 private:
  std::span<const double> weights_;
  std::vector<ad::Var> items_;
  ad::Tape* tape_ = nullptr;
  std::uint32_t series_first_ = 0;
  std::uint32_t weights_first_ = 0;
};

}  // namespace epinuts

namespace epinuts {

inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.value; }

}  // namespace epinuts
