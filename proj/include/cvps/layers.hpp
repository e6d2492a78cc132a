#pragma once

#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvps/autodiff.hpp"
#include "cvps/ctensor.hpp"
#include "cvps/optim.hpp"
#include "cvps/polyphase.hpp"
#include "cvps/rng.hpp"

namespace cvps {

/// Supplies Gumbel noise for the PD at `depth`; `count` values are requested.
using NoiseSource = std::function<std::vector<double>(std::size_t depth, std::size_t count)>;

/**
 * State threaded through one forward pass: the tape, bound parameters, the
 * train/eval switch, and the PD -> PU selection stack.
 */
struct ForwardContext {
  ForwardContext(Tape& t, const Binding& b) : tape(t), params(b) {}

  Tape& tape;
  const Binding& params;
  bool training = false;
  double temperature = 1.0;
  Rng* rng = nullptr;
  NoiseSource noise;  // overrides rng when set
  SelectionStack selections;
  std::vector<std::size_t> chosen;  // flat k* of every PD, in call order

  std::vector<double> draw_noise(std::size_t depth, std::size_t count);
};

/// Circular, stride-1, centred complex convolution (cross-correlation) layer.
struct ConvLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t spatial_axes = 2;
  bool real_weights = false;

  /// Weights [C_out, C_in, k...]; complex re/im ~ N(0, 1 / (2 fan_in)) each,
  /// real ~ N(0, 1 / fan_in). Bias starts at zero.
  static ConvLayer create(ParamStore& store, const std::string& name, std::size_t cin,
                          std::size_t cout, std::size_t kernel, std::size_t spatial_axes,
                          bool real_weights, Rng& rng);

  VarTensor forward(ForwardContext& ctx, const VarTensor& x) const;
};

/// ReLU(|z| + b) e^{j arg z}, one real bias per channel; 0 at z = 0.
struct ModReLU {
  std::size_t bias = 0;
  std::size_t channels = 0;

  static ModReLU create(ParamStore& store, const std::string& name, std::size_t channels,
                        double init = 0.0);
  VarTensor forward(ForwardContext& ctx, const VarTensor& x) const;
};

CVar modrelu(Tape& tape, CVar z, Var b);

/// Split ReLU on real and imaginary parts (activation of the dual real-valued baseline).
VarTensor split_relu(Tape& tape, const VarTensor& x);

/// Fully connected complex layer on a vector [C_in] -> [C_out].
struct LinearLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  bool real_weights = false;

  static LinearLayer create(ParamStore& store, const std::string& name, std::size_t in,
                            std::size_t out, bool real_weights, Rng& rng);
  VarTensor forward(ForwardContext& ctx, const VarTensor& x) const;
};

/**
 * Complex max pooling: keeps the element of largest modulus (lowest index among
 * ties). Sliding mode uses circular windows n .. n + window - 1 per spatial axis
 * and keeps the spatial size; subsampling is left to the polyphase layers.
 */
enum class PoolMode { global, sliding };
VarTensor cmax_pool(const VarTensor& z, std::size_t window, PoolMode mode,
                    std::size_t spatial_axes);
ComplexTensor cmax_pool(const ComplexTensor& z, std::size_t window, PoolMode mode,
                        std::size_t spatial_axes);

/// Mean over all spatial positions per channel: [C, spatial...] -> [C].
VarTensor global_mean(Tape& tape, const VarTensor& z);

/// Fixed-coefficient 3-tap separable circular filter (side, centre, side).
VarTensor three_tap(Tape& tape, const VarTensor& z, std::size_t spatial_axes, double side,
                    double centre);

// Plain-tensor conveniences -----------------------------------------------------

ComplexTensor modrelu(const ComplexTensor& z, std::span<const double> bias_per_channel);

}  // namespace cvps
