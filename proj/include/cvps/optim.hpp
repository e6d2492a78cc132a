#pragma once

#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvps/autodiff.hpp"
#include "cvps/rng.hpp"

namespace cvps {

/**
 * Learnable tensor. Complex parameters keep interleaved (re, im) pairs in
 * `value`, so value.size() == 2 * shape_size(shape) for them.
 */
struct Param {
  std::string name;
  Shape shape;
  bool is_complex = false;
  std::string role;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t count() const { return shape_size(shape); }
};

class ParamStore {
 public:
  std::size_t add(std::string name, Shape shape, bool is_complex, std::string role);

  Param& operator[](std::size_t id) { return params_.at(id); }
  const Param& operator[](std::size_t id) const { return params_.at(id); }
  std::size_t size() const { return params_.size(); }
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  /// Total number of real scalars.
  std::size_t scalar_count() const;
  void zero_grad();

  /// Complex: re/im ~ N(0, std^2) independently. Real: N(0, std^2).
  void init_normal(std::size_t id, double std, Rng& rng);
  void fill(std::size_t id, double v);

 private:
  std::vector<Param> params_;
};

/// Parameters of a store bound as leaf variables of one tape.
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store);
  /// Binds existing variables, laid out as the concatenation of every Param::value.
  Binding(const ParamStore& store, std::span<const Var> flat);

  std::span<const Var> real(std::size_t id) const { return reals_.at(id); }
  std::span<const CVar> complex(std::size_t id) const { return complexes_.at(id); }

  /// Adds d loss / d param from the tape into each Param::grad.
  void accumulate(const Tape& tape, ParamStore& store) const;

 private:
  std::vector<std::vector<Var>> reals_;
  std::vector<std::vector<CVar>> complexes_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  // Training defaults for the three tasks.
  static AdamWConfig classification(double lr = 1e-3) { return {lr, 0.9, 0.999, 1e-8, 1e-5}; }
  static AdamWConfig segmentation() { return {1e-3, 0.9, 0.999, 1e-8, 5e-4}; }
  static AdamWConfig reconstruction() { return {5e-4, 0.9, 0.999, 1e-8, 0.0}; }
};

/// Concatenation of every Param::value, in store order.
std::vector<double> flatten_values(const ParamStore& store);

/// Adam with decoupled weight decay, applied to every real scalar of the store.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}
  void step(ParamStore& store);
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct GradcheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_error = 0.0;
  std::size_t worst = 0;
  bool pass = false;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/**
 * Central-difference check of reverse-mode gradients. Relative error per
 * coordinate is |g_ad - g_fd| / (|g_fd| + floor).
 */
GradcheckReport gradcheck(const ScalarFn& f, std::span<const double> params,
                          double h = 1e-6, double tol = 1e-4, double floor = 1e-12);

}  // namespace cvps
