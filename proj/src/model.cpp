#include "cvps/model.hpp"

#include <cmath>
#include <stdexcept>

namespace cvps {

Task parse_task(const std::string& s) {
  if (s == "classify") return Task::classify;
  if (s == "segment") return Task::segment;
  if (s == "reconstruct") return Task::reconstruct;
  throw std::invalid_argument("unknown task '" + s + "'");
}

std::string task_name(Task t) {
  switch (t) {
    case Task::classify: return "classify";
    case Task::segment: return "segment";
    case Task::reconstruct: return "reconstruct";
  }
  return "?";
}

SamplingMode parse_sampling(const std::string& s) {
  if (s == "strided") return SamplingMode::strided;
  if (s == "lpf") return SamplingMode::lpf;
  if (s == "aps") return SamplingMode::aps;
  if (s == "lps") return SamplingMode::lps;
  throw std::invalid_argument("unknown sampling mode '" + s + "'");
}

std::string sampling_name(SamplingMode m) {
  switch (m) {
    case SamplingMode::strided: return "strided";
    case SamplingMode::lpf: return "lpf";
    case SamplingMode::aps: return "aps";
    case SamplingMode::lps: return "lps";
  }
  return "?";
}

void ModelSpec::validate() const {
  if (depth == 0) throw std::invalid_argument("model: depth must be >= 1");
  if (channels == 0 || in_channels == 0) throw std::invalid_argument("model: zero channels");
  if (spatial_axes == 0 || spatial_axes > 3) throw std::invalid_argument("model: 1..3 spatial axes");
  if (kernel == 0 || kernel % 2 == 0) throw std::invalid_argument("model: kernel must be odd");
  if (p < 2) throw std::invalid_argument("model: factor p must be >= 2");
  if (task != Task::reconstruct && n_classes < 2) {
    throw std::invalid_argument("model: need at least 2 classes");
  }
  if (head_pool != "max" && head_pool != "mean") {
    throw std::invalid_argument("model: head_pool must be max or mean, got '" + head_pool + "'");
  }
  if (projection.kind == ProjectionKind::polydec && projection.order == 0) {
    throw std::invalid_argument("model: PolyDec order must be >= 1");
  }
}

nlohmann::json ModelSpec::to_json() const {
  return {{"task", task_name(task)},
          {"depth", depth},
          {"channels", channels},
          {"in_channels", in_channels},
          {"n_classes", n_classes},
          {"spatial_axes", spatial_axes},
          {"kernel", kernel},
          {"p", p},
          {"sampling", sampling_name(sampling)},
          {"projection", ProjectionSpec::kind_name(projection.kind)},
          {"projection_order", projection.order},
          {"projection_mlp_widths", projection.mlp_widths},
          {"dual_real", dual_real},
          {"lowpass_after_pu", lowpass_after_pu},
          {"pool", pool},
          {"head_pool", head_pool}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.task = parse_task(j.at("task").get<std::string>());
  s.depth = j.at("depth").get<std::size_t>();
  s.channels = j.at("channels").get<std::size_t>();
  s.in_channels = j.at("in_channels").get<std::size_t>();
  s.n_classes = j.at("n_classes").get<std::size_t>();
  s.spatial_axes = j.at("spatial_axes").get<std::size_t>();
  s.kernel = j.at("kernel").get<std::size_t>();
  s.p = j.at("p").get<std::size_t>();
  s.sampling = parse_sampling(j.at("sampling").get<std::string>());
  s.projection.kind = ProjectionSpec::parse_kind(j.at("projection").get<std::string>());
  s.projection.order = j.at("projection_order").get<std::size_t>();
  s.projection.mlp_widths = j.at("projection_mlp_widths").get<std::vector<std::size_t>>();
  s.dual_real = j.at("dual_real").get<bool>();
  s.lowpass_after_pu = j.at("lowpass_after_pu").get<bool>();
  s.pool = j.value("pool", true);
  s.head_pool = j.value("head_pool", std::string("mean"));
  s.validate();
  return s;
}

ComplexTensor stack_real_imag(const ComplexTensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("stack_real_imag: need a channel axis");
  const std::size_t c = x.dim(0);
  const std::size_t plane = x.size() / c;
  Shape s = x.shape();
  s[0] = 2 * c;
  ComplexTensor out(s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i].real();
    out[c * plane + i] = x[i].imag();
  }
  return out;
}

// --- resampling ----------------------------------------------------------------

VarTensor Resampler::down(ForwardContext& ctx, const VarTensor& x) const {
  Tape& tape = ctx.tape;
  PolyphaseIndex k{std::vector<std::size_t>(spatial_axes, 0), p};
  VarTensor out;
  switch (mode) {
    case SamplingMode::strided:
      out = downsample(x, p, spatial_axes);
      break;
    case SamplingMode::lpf:
      out = downsample(three_tap(tape, x, spatial_axes, 0.25, 0.5), p, spatial_axes);
      break;
    case SamplingMode::aps: {
      const auto comps = all_components(x, spatial_axes, p);
      std::vector<ComplexTensor> cv;
      cv.reserve(comps.size());
      for (const auto& c : comps) cv.push_back(values(c));
      const auto sc = norm_scores(cv);
      const std::size_t f = argmax_lowest(sc.values);
      k = PolyphaseIndex::from_flat(f, spatial_axes, p);
      out = comps[f];
      break;
    }
    case SamplingMode::lps: {
      if (!lps) throw std::logic_error("LPS resampler without a selector");
      const auto comps = all_components(x, spatial_axes, p);
      const auto sel = lps->select(ctx, comps, depth);
      k = PolyphaseIndex::from_flat(sel.k_star, spatial_axes, p);
      if (sel.weights.empty()) {
        out = comps[sel.k_star];
      } else {
        // Straight-through mix: forward equals the winner exactly (weights 1 and 0).
        std::vector<CVar> mixed(comps[0].size());
        std::vector<Var> re(comps.size()), im(comps.size());
        for (std::size_t i = 0; i < mixed.size(); ++i) {
          for (std::size_t c = 0; c < comps.size(); ++c) {
            re[c] = comps[c][i].re;
            im[c] = comps[c][i].im;
          }
          mixed[i] = {tape.dot(sel.weights, re), tape.dot(sel.weights, im)};
        }
        out = VarTensor(comps[0].shape(), std::move(mixed));
      }
      break;
    }
  }
  ctx.chosen.push_back(k.flat());
  ctx.selections.push(depth, std::move(k));
  return out;
}

VarTensor Resampler::up(ForwardContext& ctx, const VarTensor& y) const {
  const PolyphaseIndex k = ctx.selections.pop(depth);
  std::vector<std::size_t> target(spatial_axes);
  const std::size_t lead = y.rank() - spatial_axes;
  for (std::size_t a = 0; a < spatial_axes; ++a) target[a] = p * y.dim(lead + a);
  const CVar zero{ctx.tape.zero(), ctx.tape.zero()};
  VarTensor u = ipoly(y, k, target, zero);
  if (lowpass_after_pu || mode == SamplingMode::lpf) {
    const double pd = static_cast<double>(p);
    u = three_tap(ctx.tape, u, spatial_axes, 0.25 * pd, 0.5 * pd);
  }
  return u;
}

// --- model -------------------------------------------------------------------

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  Rng rng(seed);
  ParamStore& st = m.params_;
  const bool real = spec.dual_real;
  const std::size_t cin = real ? 2 * spec.in_channels : spec.in_channels;
  std::vector<std::size_t> width(spec.depth);
  for (std::size_t i = 0; i < spec.depth; ++i) width[i] = spec.channels << i;

  std::size_t c = cin;
  for (std::size_t i = 0; i < spec.depth; ++i) {
    const std::string name = "enc" + std::to_string(i);
    m.enc_conv_.push_back(ConvLayer::create(st, name + ".conv", c, width[i], spec.kernel,
                                            spec.spatial_axes, real, rng));
    m.enc_act_.push_back(real ? ModReLU{} : ModReLU::create(st, name + ".act", width[i]));
    Resampler r;
    r.mode = spec.sampling;
    r.depth = i;
    r.spatial_axes = spec.spatial_axes;
    r.p = spec.p;
    r.lowpass_after_pu = spec.lowpass_after_pu;
    if (spec.sampling == SamplingMode::lps) {
      r.lps = LpsSelector::create(st, name + ".lps", width[i], spec.projection, spec.spatial_axes,
                                  spec.p, rng);
    }
    m.resamplers_.push_back(std::move(r));
    c = width[i];
  }

  if (spec.task == Task::classify) {
    m.head_ = ConvLayer::create(st, "head", c, spec.n_classes, 1, spec.spatial_axes, real, rng);
    return m;
  }
  const std::size_t out = spec.task == Task::segment ? spec.n_classes : cin;
  for (std::size_t i = spec.depth; i-- > 0;) {
    const std::string name = "dec" + std::to_string(i);
    const std::size_t co = i == 0 ? out : width[i - 1];
    m.dec_conv_.push_back(ConvLayer::create(st, name + ".conv", width[i], co, spec.kernel,
                                            spec.spatial_axes, real, rng));
    m.dec_act_.push_back((real || i == 0) ? ModReLU{} : ModReLU::create(st, name + ".act", co));
  }
  return m;
}

VarTensor Model::activate(ForwardContext& ctx, const ModReLU& act, const VarTensor& x) const {
  return spec_.dual_real ? split_relu(ctx.tape, x) : act.forward(ctx, x);
}

VarTensor Model::forward(ForwardContext& ctx, const ComplexTensor& x) const {
  if (x.rank() != spec_.spatial_axes + 1 || x.dim(0) != spec_.in_channels) {
    throw std::invalid_argument("model: expected input [" + std::to_string(spec_.in_channels) +
                                ", spatial x" + std::to_string(spec_.spatial_axes) + "], got " +
                                shape_string(x.shape()));
  }
  std::size_t factor = 1;
  for (std::size_t i = 0; i < spec_.depth; ++i) factor *= spec_.p;
  for (std::size_t a = 1; a < x.rank(); ++a) {
    if (x.dim(a) % factor != 0) {
      throw std::invalid_argument("model: spatial length " + std::to_string(x.dim(a)) +
                                  " not divisible by " + std::to_string(factor));
    }
  }
  ctx.selections.clear();
  ctx.chosen.clear();
  VarTensor h = constant_tensor(ctx.tape, spec_.dual_real ? stack_real_imag(x) : x);
  const std::size_t axes = spec_.spatial_axes;
  for (std::size_t i = 0; i < spec_.depth; ++i) {
    h = activate(ctx, enc_act_[i], enc_conv_[i].forward(ctx, h));
    if (spec_.task == Task::classify && spec_.pool) {
      h = cmax_pool(h, 2, PoolMode::sliding, axes);
    }
    h = resamplers_[i].down(ctx, h);
  }
  if (spec_.task == Task::classify) {
    const VarTensor y = head_->forward(ctx, h);
    if (spec_.head_pool == "max") return cmax_pool(y, 0, PoolMode::global, axes);
    Tape& tape = ctx.tape;
    const std::size_t n = y.dim(0);
    const std::size_t plane = y.size() / n;
    VarTensor out(Shape{n});
    std::vector<Var> mags(plane);
    const std::vector<double> w(plane, 1.0 / static_cast<double>(plane));
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const CVar& v = y[c * plane + i];
        mags[i] = spec_.dual_real ? v.re : tape.sqrt(abs2(v));
      }
      out[c] = {tape.linear(mags, w), tape.zero()};
    }
    return out;
  }
  for (std::size_t j = 0; j < dec_conv_.size(); ++j) {
    const std::size_t i = spec_.depth - 1 - j;
    h = resamplers_[i].up(ctx, h);
    h = dec_conv_[j].forward(ctx, h);
    if (i != 0) h = activate(ctx, dec_act_[j], h);
  }
  if (spec_.task == Task::reconstruct && spec_.dual_real) {
    const std::size_t c = spec_.in_channels;
    const std::size_t plane = h.size() / (2 * c);
    Shape s = h.shape();
    s[0] = c;
    std::vector<CVar> out(c * plane);
    for (std::size_t i = 0; i < c * plane; ++i) out[i] = {h[i].re, h[c * plane + i].re};
    return VarTensor(std::move(s), std::move(out));
  }
  return h;
}

ComplexTensor Model::infer(const ComplexTensor& x) const {
  thread_local Tape tape(false);
  tape.clear();
  Binding binding(tape, params_);
  ForwardContext ctx(tape, binding);
  return values(forward(ctx, x));
}

std::vector<Var> Model::real_logits(Tape& tape, std::span<const CVar> z) const {
  std::vector<Var> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = spec_.dual_real ? z[i].re : tape.sqrt(abs2(z[i]));
  }
  return out;
}

Var Model::loss(ForwardContext& ctx, const VarTensor& out, const Sample& s) const {
  Tape& tape = ctx.tape;
  switch (spec_.task) {
    case Task::classify:
      return cross_entropy(tape, real_logits(tape, out.data()), s.label);
    case Task::segment: {
      const std::size_t n = spec_.n_classes;
      const std::size_t plane = out.size() / n;
      if (s.mask.size() != plane) throw std::invalid_argument("segment loss: mask size mismatch");
      std::vector<Var> terms(plane);
      std::vector<CVar> z(n);
      for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < n; ++c) z[c] = out[c * plane + i];
        terms[i] = cross_entropy(tape, real_logits(tape, z), s.mask[i]);
      }
      const std::vector<double> coef(plane, 1.0 / static_cast<double>(plane));
      return tape.linear(terms, coef);
    }
    case Task::reconstruct: {
      if (out.size() != s.x.size()) throw std::invalid_argument("reconstruct loss: size mismatch");
      std::vector<Var> terms(out.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        const CVar d{tape.add_const(out[i].re, -s.x[i].real()),
                     tape.add_const(out[i].im, -s.x[i].imag())};
        terms[i] = abs2(d);
      }
      const std::vector<double> coef(terms.size(), 1.0 / static_cast<double>(terms.size()));
      return tape.linear(terms, coef);
    }
  }
  throw std::logic_error("unknown task");
}

std::vector<std::size_t> Model::predict(const ComplexTensor& x) const {
  if (spec_.task == Task::reconstruct) throw std::logic_error("predict: reconstruction model");
  const ComplexTensor out = infer(x);
  auto score = [&](cplx z) { return spec_.dual_real ? z.real() : std::abs(z); };
  if (spec_.task == Task::classify) {
    std::vector<double> s(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) s[i] = score(out[i]);
    return {argmax_lowest(s)};
  }
  const std::size_t n = spec_.n_classes;
  const std::size_t plane = out.size() / n;
  std::vector<std::size_t> pred(plane);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < n; ++c) s[c] = score(out[c * plane + i]);
    pred[i] = argmax_lowest(s);
  }
  return pred;
}

}  // namespace cvps
