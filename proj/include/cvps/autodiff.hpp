#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "cvps/ndarray.hpp"

namespace cvps {

class Tape;

/// Handle to a real scalar recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  double value() const;
};

/// A complex value as an independent (re, im) pair of tape scalars, so the
/// gradients it receives are dL/dre and dL/dim.
struct CVar {
  Var re;
  Var im;

  std::complex<double> value() const { return {re.value(), im.value()}; }
};

using VarTensor = NdArray<CVar>;

class AutodiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Append-only reverse-mode tape over real scalars.
 *
 * Nodes are stored in topological order (inputs always precede the node) with
 * their local partials in CSR form. With recording disabled only forward
 * values are kept, which is how inference runs.
 */
class Tape {
 public:
  explicit Tape(bool record = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return values_.size(); }
  std::size_t edge_count() const { return inputs_.size(); }

  Var constant(double v);
  /// Leaf whose gradient is read back after backward(); identical to constant()
  /// on the tape, the distinction is the caller's.
  Var variable(double v) { return constant(v); }
  Var zero() { return zero_; }
  Var one() { return one_; }

  double value(Var v) const { return values_[v.id]; }
  double grad(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var exp(Var a);
  Var log(Var a);
  Var sqrt(Var a);
  Var atan2(Var y, Var x);
  Var relu(Var a);
  /// Value of the largest input (lowest index on ties); gradient flows to it only.
  Var max_select(std::span<const Var> xs);
  /// sum_i c_i a_i b_i (c_i = 1 when `coef` is empty).
  Var dot(std::span<const Var> a, std::span<const Var> b,
          std::span<const double> coef = {});
  /// sum_i c_i x_i (c_i = 1 when `coef` is empty).
  Var linear(std::span<const Var> xs, std::span<const double> coef = {});
  /// Forward value `forward`, backward identical to `soft` (straight-through).
  Var straight_through(double forward, Var soft);

  /**
   * Reverse sweep from `loss`. Gradients accumulate into per-node adjoints;
   * a second call without reset_gradients() raises.
   */
  void backward(Var loss);
  void reset_gradients();

  /// Drops every node but keeps the allocated storage; earlier Vars become invalid.
  void clear();

 private:
  Var push(double value);
  Var push(double value, std::initializer_list<std::uint32_t> in,
           std::initializer_list<double> d);
  void check(Var v) const;

  bool record_;
  bool backward_done_ = false;
  std::vector<double> values_;
  std::vector<std::uint32_t> begin_;
  std::vector<std::uint32_t> inputs_;
  std::vector<double> partials_;
  std::vector<double> adjoint_;
  Var zero_;
  Var one_;
};

inline double Var::value() const { return tape->value(*this); }

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator*(double c, Var a) { return a.tape->scale(a, c); }
inline Var operator*(Var a, double c) { return a.tape->scale(a, c); }
inline Var operator+(Var a, double c) { return a.tape->add_const(a, c); }
inline Var operator+(double c, Var a) { return a.tape->add_const(a, c); }
inline Var operator-(Var a, double c) { return a.tape->add_const(a, -c); }
inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var sqrt(Var a) { return a.tape->sqrt(a); }
inline Var atan2(Var y, Var x) { return y.tape->atan2(y, x); }
inline Var relu(Var a) { return a.tape->relu(a); }

// Complex helpers --------------------------------------------------------------

CVar cconstant(Tape& tape, std::complex<double> z);
CVar cadd(CVar a, CVar b);
CVar cmul(CVar a, CVar b);
/// |z|^2 as a single node.
Var abs2(CVar z);

/**
 * sum_i w_i x_i + bias over complex pairs, emitted as two fused nodes. With
 * `real_weights` the imaginary parts of w are ignored (dual real-valued layers).
 */
CVar cdot(Tape& tape, std::span<const CVar> w, std::span<const CVar> x, CVar bias,
          bool real_weights = false);

VarTensor constant_tensor(Tape& tape, const NdArray<std::complex<double>>& t);
NdArray<std::complex<double>> values(const VarTensor& t);

// Softmax family on tape scalars -------------------------------------------------

std::vector<Var> softmax(Tape& tape, std::span<const Var> logits, double temperature = 1.0);
/// -log softmax(logits)[label]
Var cross_entropy(Tape& tape, std::span<const Var> logits, std::size_t label);

}  // namespace cvps
