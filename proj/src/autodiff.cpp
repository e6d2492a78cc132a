#include "cvps/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cvps {

Tape::Tape(bool record) : record_(record) {
  begin_.push_back(0);
  zero_ = push(0.0);
  one_ = push(1.0);
}

void Tape::clear() {
  values_.clear();
  begin_.clear();
  inputs_.clear();
  partials_.clear();
  adjoint_.clear();
  backward_done_ = false;
  begin_.push_back(0);
  zero_ = push(0.0);
  one_ = push(1.0);
}

Var Tape::push(double value) {
  values_.push_back(value);
  begin_.push_back(static_cast<std::uint32_t>(inputs_.size()));
  return Var{this, static_cast<std::uint32_t>(values_.size() - 1)};
}

Var Tape::push(double value, std::initializer_list<std::uint32_t> in,
               std::initializer_list<double> d) {
  if (record_) {
    inputs_.insert(inputs_.end(), in.begin(), in.end());
    partials_.insert(partials_.end(), d.begin(), d.end());
  }
  return push(value);
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= values_.size()) {
    throw AutodiffError("variable does not belong to this tape");
  }
}

Var Tape::constant(double v) { return push(v); }

double Tape::grad(Var v) const {
  check(v);
  if (!backward_done_) throw AutodiffError("grad requested before backward");
  return adjoint_[v.id];
}

Var Tape::add(Var a, Var b) { return push(value(a) + value(b), {a.id, b.id}, {1.0, 1.0}); }
Var Tape::sub(Var a, Var b) { return push(value(a) - value(b), {a.id, b.id}, {1.0, -1.0}); }

Var Tape::mul(Var a, Var b) {
  const double x = value(a), y = value(b);
  return push(x * y, {a.id, b.id}, {y, x});
}

Var Tape::div(Var a, Var b) {
  const double x = value(a), y = value(b);
  if (y == 0.0) throw AutodiffError("division by zero");
  return push(x / y, {a.id, b.id}, {1.0 / y, -x / (y * y)});
}

Var Tape::neg(Var a) { return push(-value(a), {a.id}, {-1.0}); }
Var Tape::scale(Var a, double c) { return push(c * value(a), {a.id}, {c}); }
Var Tape::add_const(Var a, double c) { return push(value(a) + c, {a.id}, {1.0}); }

Var Tape::exp(Var a) {
  const double e = std::exp(value(a));
  return push(e, {a.id}, {e});
}

Var Tape::log(Var a) {
  const double x = value(a);
  if (x <= 0.0) throw AutodiffError("log of non-positive value " + std::to_string(x));
  return push(std::log(x), {a.id}, {1.0 / x});
}

Var Tape::sqrt(Var a) {
  const double x = value(a);
  if (x < 0.0) throw AutodiffError("sqrt of negative value " + std::to_string(x));
  const double r = std::sqrt(x);
  // Subgradient 0 at the origin, where the derivative is unbounded.
  return push(r, {a.id}, {r > 0.0 ? 0.5 / r : 0.0});
}

Var Tape::atan2(Var y, Var x) {
  const double yv = value(y), xv = value(x);
  const double r2 = xv * xv + yv * yv;
  const double dy = r2 > 0.0 ? xv / r2 : 0.0;
  const double dx = r2 > 0.0 ? -yv / r2 : 0.0;
  return push(std::atan2(yv, xv), {y.id, x.id}, {dy, dx});
}

Var Tape::relu(Var a) {
  const double x = value(a);
  return x > 0.0 ? push(x, {a.id}, {1.0}) : push(0.0, {a.id}, {0.0});
}

Var Tape::max_select(std::span<const Var> xs) {
  if (xs.empty()) throw AutodiffError("max_select of empty set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (value(xs[i]) > value(xs[best])) best = i;
  }
  return push(value(xs[best]), {xs[best].id}, {1.0});
}

Var Tape::dot(std::span<const Var> a, std::span<const Var> b,
              std::span<const double> coef) {
  if (a.size() != b.size() || (!coef.empty() && coef.size() != a.size())) {
    throw AutodiffError("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double c = coef.empty() ? 1.0 : coef[i];
    acc += c * values_[a[i].id] * values_[b[i].id];
  }
  if (record_) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double c = coef.empty() ? 1.0 : coef[i];
      inputs_.push_back(a[i].id);
      partials_.push_back(c * values_[b[i].id]);
      inputs_.push_back(b[i].id);
      partials_.push_back(c * values_[a[i].id]);
    }
  }
  return push(acc);
}

Var Tape::linear(std::span<const Var> xs, std::span<const double> coef) {
  if (!coef.empty() && coef.size() != xs.size()) throw AutodiffError("linear: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += (coef.empty() ? 1.0 : coef[i]) * values_[xs[i].id];
  }
  if (record_) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      inputs_.push_back(xs[i].id);
      partials_.push_back(coef.empty() ? 1.0 : coef[i]);
    }
  }
  return push(acc);
}

Var Tape::straight_through(double forward, Var soft) {
  return push(forward, {soft.id}, {1.0});
}

void Tape::backward(Var loss) {
  check(loss);
  if (!record_) throw AutodiffError("backward on a tape that does not record");
  if (backward_done_) throw AutodiffError("backward called twice without reset_gradients()");
  adjoint_.assign(values_.size(), 0.0);
  adjoint_[loss.id] = 1.0;
  for (std::size_t n = loss.id + 1; n-- > 0;) {
    const double g = adjoint_[n];
    if (g == 0.0) continue;
    for (std::uint32_t e = begin_[n]; e < begin_[n + 1]; ++e) {
      adjoint_[inputs_[e]] += g * partials_[e];
    }
  }
  backward_done_ = true;
}

void Tape::reset_gradients() {
  adjoint_.clear();
  backward_done_ = false;
}

// ---------------------------------------------------------------------------

CVar cconstant(Tape& tape, std::complex<double> z) {
  return {tape.constant(z.real()), tape.constant(z.imag())};
}

CVar cadd(CVar a, CVar b) { return {a.re + b.re, a.im + b.im}; }

CVar cmul(CVar a, CVar b) {
  Tape& t = *a.re.tape;
  const Var lr[2] = {a.re, a.im};
  const Var rr[2] = {b.re, b.im};
  const Var ri[2] = {b.im, b.re};
  static constexpr double sub[2] = {1.0, -1.0};
  return {t.dot(lr, rr, sub), t.dot(lr, ri)};
}

Var abs2(CVar z) {
  const Var v[2] = {z.re, z.im};
  return z.re.tape->dot(v, v);
}

CVar cdot(Tape& tape, std::span<const CVar> w, std::span<const CVar> x, CVar bias,
          bool real_weights) {
  if (w.size() != x.size()) throw AutodiffError("cdot: length mismatch");
  const std::size_t n = w.size();
  thread_local std::vector<Var> a, b;
  thread_local std::vector<double> c;
  const std::size_t terms = real_weights ? n + 1 : 2 * n + 1;
  a.resize(terms);
  b.resize(terms);
  c.resize(terms);
  // re = sum wr xr - wi xi + br
  std::size_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a[t] = w[i].re; b[t] = x[i].re; c[t++] = 1.0;
    if (!real_weights) { a[t] = w[i].im; b[t] = x[i].im; c[t++] = -1.0; }
  }
  a[t] = bias.re; b[t] = tape.one(); c[t++] = 1.0;
  const Var re = tape.dot(a, b, c);
  // im = sum wr xi + wi xr + bi
  t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a[t] = w[i].re; b[t] = x[i].im; c[t++] = 1.0;
    if (!real_weights) { a[t] = w[i].im; b[t] = x[i].re; c[t++] = 1.0; }
  }
  a[t] = bias.im; b[t] = tape.one(); c[t++] = 1.0;
  const Var im = tape.dot(a, b, c);
  return {re, im};
}

VarTensor constant_tensor(Tape& tape, const NdArray<std::complex<double>>& t) {
  return map(t, [&](const std::complex<double>& z) { return cconstant(tape, z); });
}

NdArray<std::complex<double>> values(const VarTensor& t) {
  return map(t, [](const CVar& v) { return v.value(); });
}

std::vector<Var> softmax(Tape& tape, std::span<const Var> logits, double temperature) {
  if (logits.empty()) return {};
  if (!(temperature > 0.0)) throw AutodiffError("softmax: temperature must be positive");
  double m = tape.value(logits[0]);
  for (auto l : logits) m = std::max(m, tape.value(l));
  // exp((x - m) / t) with the max folded in as a constant offset.
  std::vector<Var> e;
  e.reserve(logits.size());
  for (auto l : logits) e.push_back(tape.exp(tape.add_const(tape.scale(l, 1.0 / temperature), -m / temperature)));
  const Var s = tape.linear(e);
  std::vector<Var> out;
  out.reserve(e.size());
  for (auto v : e) out.push_back(tape.div(v, s));
  return out;
}

Var cross_entropy(Tape& tape, std::span<const Var> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(logits.size()) + " classes");
  }
  double m = tape.value(logits[0]);
  for (auto l : logits) m = std::max(m, tape.value(l));
  std::vector<Var> e;
  e.reserve(logits.size());
  for (auto l : logits) e.push_back(tape.exp(tape.add_const(l, -m)));
  // log-sum-exp - x_label
  const Var lse = tape.add_const(tape.log(tape.linear(e)), m);
  return tape.sub(lse, logits[label]);
}

}  // namespace cvps
