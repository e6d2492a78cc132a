#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvps/autodiff.hpp"
#include "cvps/ctensor.hpp"
#include "cvps/layers.hpp"
#include "cvps/optim.hpp"
#include "cvps/polyphase.hpp"
#include "cvps/select.hpp"

namespace cvps {

enum class Task { classify, segment, reconstruct };
enum class SamplingMode { strided, lpf, aps, lps };

Task parse_task(const std::string& s);
std::string task_name(Task t);
SamplingMode parse_sampling(const std::string& s);
std::string sampling_name(SamplingMode m);

struct ModelSpec {
  Task task = Task::classify;
  std::size_t depth = 2;         ///< downsampling stages (and upsampling stages for decoders)
  std::size_t channels = 8;      ///< first stage width, doubled per stage
  std::size_t in_channels = 3;
  std::size_t n_classes = 7;
  std::size_t spatial_axes = 2;
  std::size_t kernel = 3;
  std::size_t p = 2;
  SamplingMode sampling = SamplingMode::lps;
  ProjectionSpec projection;
  bool dual_real = false;        ///< real weights, re/im stacked as channels, split ReLU
  bool lowpass_after_pu = false;
  bool pool = true;              ///< sliding complex max pool before each downsampler (classify)
  /// Classifier head reduction: "max" keeps the largest-modulus response per class,
  /// "mean" averages the per-pixel moduli (real parts for dual real).
  std::string head_pool = "mean";

  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// One training/evaluation example.
struct Sample {
  ComplexTensor x;                  ///< [C, spatial...]
  std::size_t label = 0;            ///< classification target
  std::vector<std::size_t> mask;    ///< per-pixel targets (segmentation)
};

/// Downsampling/upsampling pair at one depth.
struct Resampler {
  SamplingMode mode = SamplingMode::strided;
  std::size_t depth = 0;
  std::size_t spatial_axes = 2;
  std::size_t p = 2;
  bool lowpass_after_pu = false;
  std::optional<LpsSelector> lps;

  VarTensor down(ForwardContext& ctx, const VarTensor& x) const;
  VarTensor up(ForwardContext& ctx, const VarTensor& y) const;
};

class Model {
 public:
  static Model build(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /**
   * Output per task: classify [n_classes] complex logits; segment [n_classes, spatial...];
   * reconstruct [in_channels, spatial...]. The input is the complex tile [C, spatial...].
   */
  VarTensor forward(ForwardContext& ctx, const ComplexTensor& x) const;

  /// Eval-mode forward on a throwaway non-recording tape.
  ComplexTensor infer(const ComplexTensor& x) const;

  /// Real logits fed to the loss: modulus (complex) or real part (dual real).
  std::vector<Var> real_logits(Tape& tape, std::span<const CVar> z) const;

  Var loss(ForwardContext& ctx, const VarTensor& out, const Sample& s) const;

  /// Classification: argmax of the real logits; segmentation: per-pixel argmax.
  std::vector<std::size_t> predict(const ComplexTensor& x) const;

 private:
  VarTensor activate(ForwardContext& ctx, const ModReLU& act, const VarTensor& x) const;

  ModelSpec spec_;
  ParamStore params_;
  std::vector<ConvLayer> enc_conv_;
  std::vector<ModReLU> enc_act_;
  std::vector<Resampler> resamplers_;
  std::vector<ConvLayer> dec_conv_;
  std::vector<ModReLU> dec_act_;
  std::optional<ConvLayer> head_;
};

/// Complex tile with real and imaginary parts stacked as 2C real channels.
ComplexTensor stack_real_imag(const ComplexTensor& x);

}  // namespace cvps
