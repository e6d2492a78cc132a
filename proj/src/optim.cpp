#include "cvps/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvps {

std::size_t ParamStore::add(std::string name, Shape shape, bool is_complex, std::string role) {
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.is_complex = is_complex;
  p.role = std::move(role);
  const std::size_t n = shape_size(p.shape) * (is_complex ? 2 : 1);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void ParamStore::init_normal(std::size_t id, double std, Rng& rng) {
  for (auto& v : params_.at(id).value) v = std * rng.normal();
}

void ParamStore::fill(std::size_t id, double v) {
  auto& p = params_.at(id);
  std::fill(p.value.begin(), p.value.end(), v);
}

Binding::Binding(Tape& tape, const ParamStore& store) {
  reals_.resize(store.size());
  complexes_.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    auto& r = reals_[i];
    r.reserve(p.value.size());
    for (double v : p.value) r.push_back(tape.variable(v));
    if (p.is_complex) {
      auto& c = complexes_[i];
      c.reserve(p.count());
      for (std::size_t j = 0; j < p.count(); ++j) c.push_back({r[2 * j], r[2 * j + 1]});
    }
  }
}

Binding::Binding(const ParamStore& store, std::span<const Var> flat) {
  if (flat.size() != store.scalar_count()) {
    throw std::invalid_argument("Binding: expected " + std::to_string(store.scalar_count()) +
                                " variables, got " + std::to_string(flat.size()));
  }
  reals_.resize(store.size());
  complexes_.resize(store.size());
  std::size_t at = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    reals_[i].assign(flat.begin() + static_cast<std::ptrdiff_t>(at),
                     flat.begin() + static_cast<std::ptrdiff_t>(at + p.value.size()));
    at += p.value.size();
    if (p.is_complex) {
      const auto& r = reals_[i];
      for (std::size_t j = 0; j < p.count(); ++j) complexes_[i].push_back({r[2 * j], r[2 * j + 1]});
    }
  }
}

std::vector<double> flatten_values(const ParamStore& store) {
  std::vector<double> out;
  out.reserve(store.scalar_count());
  for (const auto& p : store.all()) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

void Binding::accumulate(const Tape& tape, ParamStore& store) const {
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& g = store[i].grad;
    const auto& r = reals_[i];
    for (std::size_t j = 0; j < r.size(); ++j) g[j] += tape.grad(r[j]);
  }
}

void AdamW::step(ParamStore& store) {
  if (m_.size() != store.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : store.all()) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& p = store[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p.value[j] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) + cfg_.weight_decay * p.value[j]);
    }
  }
}

GradcheckReport gradcheck(const ScalarFn& f, std::span<const double> params, double h,
                          double tol, double floor) {
  GradcheckReport rep;
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (double p : params) vars.push_back(tape.variable(p));
    const Var loss = f(tape, vars);
    tape.backward(loss);
    for (auto v : vars) rep.analytic.push_back(tape.grad(v));
  }
  auto eval = [&](std::span<const double> at) {
    Tape tape(false);
    std::vector<Var> vars;
    vars.reserve(at.size());
    for (double p : at) vars.push_back(tape.variable(p));
    return f(tape, vars).value();
  };
  std::vector<double> work(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    work[i] = params[i] + h;
    const double up = eval(work);
    work[i] = params[i] - h;
    const double dn = eval(work);
    work[i] = params[i];
    const double g = (up - dn) / (2.0 * h);
    rep.numeric.push_back(g);
    const double rel = std::abs(rep.analytic[i] - g) / (std::abs(g) + floor);
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst = i;
    }
  }
  rep.pass = rep.max_rel_error <= tol;
  return rep;
}

}  // namespace cvps
