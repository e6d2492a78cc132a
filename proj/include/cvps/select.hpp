#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cvps/autodiff.hpp"
#include "cvps/ctensor.hpp"
#include "cvps/layers.hpp"
#include "cvps/optim.hpp"
#include "cvps/polyphase.hpp"
#include "cvps/rng.hpp"

namespace cvps {

// ---------------------------------------------------------------------------
// Projections from complex selection logits to real scores.

enum class ProjectionKind { norm, polydec, mlp, msoftmax, psoftmax };

struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::polydec;
  std::size_t order = 2;                    ///< PolyDec polynomial order M
  std::vector<std::size_t> mlp_widths{8};   ///< hidden widths per component

  /// Accepts "norm", "polydec", "mlp", "msoftmax", "psoftmax".
  static ProjectionKind parse_kind(const std::string& s);
  static std::string kind_name(ProjectionKind k);
  bool implicit() const {
    return kind == ProjectionKind::msoftmax || kind == ProjectionKind::psoftmax;
  }
};

/// Number of theta coefficients of PolyDec(M): sum_{m=1..M} (m + 1).
std::size_t polydec_theta_count(std::size_t order);

std::vector<double> project_norm(std::span<const cplx> z);

/**
 * PolyDec: beta + sum_{m=1..M} sum_{i=0..m} theta[m,i] a^i b^(m-i) with a = Re z,
 * b = Im z. Theta is laid out m-major: (1,0), (1,1), (2,0), (2,1), (2,2), ...
 */
std::vector<double> project_polydec(std::span<const cplx> z, std::span<const double> theta,
                                    double beta, std::size_t order);
Var polydec(Tape& tape, CVar z, std::span<const Var> theta, Var beta, std::size_t order);

/**
 * Weights of the MLP projection. The network maps the n complex logits, stacked as
 * [Re, Im] per component, to n real scores. Each layer is a convolution over the
 * component group Z_p^d: weight[g][out][in] couples input component h to output
 * component (h + g), bias is shared by all components. A spatial shift permutes the
 * components by a group translation, so the scores permute the same way.
 */
struct MlpParams {
  std::size_t spatial_axes = 1;
  std::size_t p = 2;
  std::vector<std::size_t> widths;           ///< 2, hidden..., 1
  std::vector<std::vector<double>> weight;   ///< per layer, [n][out][in]
  std::vector<std::vector<double>> bias;     ///< per layer, [out]
};

std::vector<double> project_mlp(std::span<const cplx> z, const MlpParams& params);

std::vector<double> msoftmax(std::span<const cplx> z);
std::vector<double> psoftmax(std::span<const cplx> z);

// ---------------------------------------------------------------------------
// Gumbel-softmax.

struct GumbelConfig {
  double initial = 1e-5;
  double gamma = 1.0;
  double minimum = 1e-5;
  std::size_t step = 0;   ///< epochs per decay; 0 means a third of the run
  bool hard = true;
  std::uint64_t seed = 0;

  static GumbelConfig classification() { return {1e-5, 1.0, 1e-5, 0, true, 0}; }
  static GumbelConfig reconstruction() { return {1e-3, 0.1, 1e-5, 0, true, 0}; }
};

/// lambda = max(minimum, initial * gamma^floor(epoch / step)).
double anneal(const GumbelConfig& cfg, std::size_t epoch, std::size_t total_epochs);

double gumbel_sample(Rng& rng);

struct GumbelSoftmaxResult {
  std::vector<double> probs;
  std::size_t index = 0;
  std::vector<double> hard;  ///< one-hot at `index`
};

/// y = softmax((x + g) / lambda) with explicit noise g.
GumbelSoftmaxResult gumbel_softmax(std::span<const double> logits, std::span<const double> noise,
                                   double temperature);
GumbelSoftmaxResult gumbel_softmax(std::span<const double> logits, double temperature, Rng& rng);

// ---------------------------------------------------------------------------
// Learnable selector.

/// Explicit or implicit projection with its parameters in a ParamStore.
struct Projection {
  ProjectionSpec spec;
  std::size_t components = 2;
  std::size_t spatial_axes = 1;
  std::size_t p = 2;
  std::size_t theta = 0, beta = 0;
  std::vector<std::size_t> mlp_weight, mlp_bias;

  static Projection create(ParamStore& store, const std::string& name, const ProjectionSpec& spec,
                           std::size_t spatial_axes, std::size_t p, Rng& rng);

  /// Real scores for explicit kinds. Implicit kinds are handled by the selector.
  std::vector<Var> project(Tape& tape, const Binding& params, std::span<const CVar> logits) const;

  MlpParams mlp_params(const ParamStore& store) const;
};

/**
 * f_theta: circular 3-tap convolution to one channel, modReLU, complex global mean.
 * Contains no striding, so its output is invariant to shifts of its input.
 */
struct SelectorNet {
  ConvLayer conv;
  ModReLU act;

  static SelectorNet create(ParamStore& store, const std::string& name, std::size_t channels,
                            std::size_t spatial_axes, Rng& rng);
  CVar forward(ForwardContext& ctx, const VarTensor& component) const;
};

struct LpsSelection {
  std::size_t k_star = 0;
  std::vector<double> scores;       ///< projected scores (explicit) or probabilities
  bool are_probabilities = false;
  std::vector<double> probs;
  std::vector<Var> weights;         ///< straight-through one-hot; empty in eval mode
};

struct LpsSelector {
  SelectorNet net;
  Projection proj;
  std::size_t spatial_axes = 1;
  std::size_t p = 2;

  static LpsSelector create(ParamStore& store, const std::string& name, std::size_t channels,
                            const ProjectionSpec& spec, std::size_t spatial_axes, std::size_t p,
                            Rng& rng);

  /// Complex logit per component, in flat component order.
  std::vector<CVar> logits(ForwardContext& ctx, std::span<const VarTensor> components) const;

  /**
   * Eval mode: argmax of the projected scores (implicit kinds: of MSoftmax/PSoftmax),
   * no noise. Training mode: Gumbel noise from ctx.draw_noise(depth, ...), hard
   * winner forward, soft distribution backward.
   */
  LpsSelection select(ForwardContext& ctx, std::span<const VarTensor> components,
                      std::size_t depth) const;
};

/// Wraps an LPS selector as a plain Selector (eval mode) for the pd() API.
Selector make_lps_selector(const LpsSelector& sel, const ParamStore& store);

}  // namespace cvps
