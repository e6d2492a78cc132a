#include "cvps/select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cvps {

ProjectionKind ProjectionSpec::parse_kind(const std::string& s) {
  if (s == "norm") return ProjectionKind::norm;
  if (s == "polydec") return ProjectionKind::polydec;
  if (s == "mlp") return ProjectionKind::mlp;
  if (s == "msoftmax") return ProjectionKind::msoftmax;
  if (s == "psoftmax") return ProjectionKind::psoftmax;
  throw std::invalid_argument("unknown projection kind '" + s + "'");
}

std::string ProjectionSpec::kind_name(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::norm: return "norm";
    case ProjectionKind::polydec: return "polydec";
    case ProjectionKind::mlp: return "mlp";
    case ProjectionKind::msoftmax: return "msoftmax";
    case ProjectionKind::psoftmax: return "psoftmax";
  }
  return "?";
}

std::size_t polydec_theta_count(std::size_t order) { return order * (order + 3) / 2; }

std::vector<double> project_norm(std::span<const cplx> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::abs(z[i]);
  return out;
}

std::vector<double> project_polydec(std::span<const cplx> z, std::span<const double> theta,
                                    double beta, std::size_t order) {
  if (theta.size() != polydec_theta_count(order)) {
    throw std::invalid_argument("project_polydec: expected " +
                                std::to_string(polydec_theta_count(order)) + " coefficients, got " +
                                std::to_string(theta.size()));
  }
  std::vector<double> out(z.size());
  for (std::size_t l = 0; l < z.size(); ++l) {
    const double a = z[l].real(), b = z[l].imag();
    double acc = beta;
    std::size_t t = 0;
    for (std::size_t m = 1; m <= order; ++m) {
      for (std::size_t i = 0; i <= m; ++i) {
        acc += theta[t++] * std::pow(a, static_cast<double>(i)) *
               std::pow(b, static_cast<double>(m - i));
      }
    }
    out[l] = acc;
  }
  return out;
}

Var polydec(Tape& tape, CVar z, std::span<const Var> theta, Var beta, std::size_t order) {
  if (theta.size() != polydec_theta_count(order)) {
    throw std::invalid_argument("polydec: coefficient count mismatch");
  }
  std::vector<Var> pa{tape.one()}, pb{tape.one()};
  for (std::size_t m = 1; m <= order; ++m) {
    pa.push_back(m == 1 ? z.re : tape.mul(pa.back(), z.re));
    pb.push_back(m == 1 ? z.im : tape.mul(pb.back(), z.im));
  }
  std::vector<Var> mono, coef;
  mono.reserve(theta.size() + 1);
  coef.reserve(theta.size() + 1);
  std::size_t t = 0;
  for (std::size_t m = 1; m <= order; ++m) {
    for (std::size_t i = 0; i <= m; ++i) {
      Var term = i == 0 ? pb[m] : (i == m ? pa[m] : tape.mul(pa[i], pb[m - i]));
      mono.push_back(term);
      coef.push_back(theta[t++]);
    }
  }
  mono.push_back(tape.one());
  coef.push_back(beta);
  return tape.dot(coef, mono);
}

namespace {

/// Flat index of (a - b) in Z_p^d.
std::size_t group_diff(std::size_t a, std::size_t b, std::size_t axes, std::size_t p) {
  const auto ka = PolyphaseIndex::from_flat(a, axes, p);
  const auto kb = PolyphaseIndex::from_flat(b, axes, p);
  PolyphaseIndex d{std::vector<std::size_t>(axes), p};
  for (std::size_t i = 0; i < axes; ++i) d.k[i] = (ka.k[i] + p - kb.k[i]) % p;
  return d.flat();
}

std::vector<double> softmax_scaled(std::span<const double> v, double temperature) {
  std::vector<double> s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] / temperature;
  return softmax(s);
}

}  // namespace

std::vector<double> project_mlp(std::span<const cplx> z, const MlpParams& params) {
  const std::size_t n = z.size();
  if (n != component_count(params.spatial_axes, params.p)) {
    throw std::invalid_argument("project_mlp: expected " +
                                std::to_string(component_count(params.spatial_axes, params.p)) +
                                " components, got " + std::to_string(n));
  }
  const std::size_t layers = params.widths.size() - 1;
  if (params.widths.front() != 2 || params.widths.back() != 1 || params.weight.size() != layers ||
      params.bias.size() != layers) {
    throw std::invalid_argument("project_mlp: malformed parameters");
  }
  std::vector<double> x(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    x[2 * k] = z[k].real();
    x[2 * k + 1] = z[k].imag();
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = params.widths[l], out = params.widths[l + 1];
    const auto& w = params.weight[l];
    if (w.size() != n * out * in || params.bias[l].size() != out) {
      throw std::invalid_argument("project_mlp: layer size mismatch");
    }
    std::vector<double> y(n * out);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t o = 0; o < out; ++o) {
        double acc = params.bias[l][o];
        for (std::size_t h = 0; h < n; ++h) {
          const std::size_t g = group_diff(k, h, params.spatial_axes, params.p);
          for (std::size_t i = 0; i < in; ++i) acc += w[(g * out + o) * in + i] * x[h * in + i];
        }
        y[k * out + o] = (l + 1 < layers) ? std::max(acc, 0.0) : acc;
      }
    }
    x = std::move(y);
  }
  return x;
}

std::vector<double> msoftmax(std::span<const cplx> z) {
  std::vector<double> re(z.size()), im(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    re[i] = z[i].real();
    im[i] = z[i].imag();
  }
  const auto sr = softmax(re), si = softmax(im);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = 0.5 * (sr[i] + si[i]);
  return out;
}

std::vector<double> psoftmax(std::span<const cplx> z) {
  std::vector<double> re(z.size()), im(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    re[i] = z[i].real();
    im[i] = z[i].imag();
  }
  const auto sr = softmax(re), si = softmax(im);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sr[i] * si[i];
  return out;
}

// --- Gumbel ------------------------------------------------------------------

double anneal(const GumbelConfig& cfg, std::size_t epoch, std::size_t total_epochs) {
  if (!(cfg.minimum > 0.0) || !(cfg.initial > 0.0)) {
    throw std::invalid_argument("anneal: temperatures must be positive");
  }
  std::size_t step = cfg.step;
  if (step == 0) step = std::max<std::size_t>(1, total_epochs / 3);
  const double decays = static_cast<double>(epoch / step);
  return std::max(cfg.minimum, cfg.initial * std::pow(cfg.gamma, decays));
}

double gumbel_sample(Rng& rng) { return rng.gumbel(); }

GumbelSoftmaxResult gumbel_softmax(std::span<const double> logits, std::span<const double> noise,
                                   double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  if (noise.size() != logits.size()) throw std::invalid_argument("gumbel_softmax: noise size");
  std::vector<double> x(logits.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = logits[i] + noise[i];
  GumbelSoftmaxResult r;
  r.probs = softmax_scaled(x, temperature);
  r.index = argmax_lowest(x);
  r.hard.assign(x.size(), 0.0);
  r.hard[r.index] = 1.0;
  return r;
}

GumbelSoftmaxResult gumbel_softmax(std::span<const double> logits, double temperature, Rng& rng) {
  std::vector<double> g(logits.size());
  for (auto& v : g) v = rng.gumbel();
  return gumbel_softmax(logits, g, temperature);
}

// --- Projection ----------------------------------------------------------------

Projection Projection::create(ParamStore& store, const std::string& name,
                              const ProjectionSpec& spec, std::size_t spatial_axes, std::size_t p,
                              Rng& rng) {
  Projection pr;
  pr.spec = spec;
  pr.spatial_axes = spatial_axes;
  pr.p = p;
  pr.components = component_count(spatial_axes, p);
  if (spec.kind == ProjectionKind::polydec) {
    if (spec.order < 1) throw std::invalid_argument("PolyDec order must be >= 1");
    const std::size_t count = polydec_theta_count(spec.order);
    pr.theta = store.add(name + ".theta", Shape{count}, false, "projection");
    store.init_normal(pr.theta, 1.0 / std::sqrt(static_cast<double>(count)), rng);
    pr.beta = store.add(name + ".beta", Shape{1}, false, "projection");
  } else if (spec.kind == ProjectionKind::mlp) {
    std::vector<std::size_t> widths{2};
    widths.insert(widths.end(), spec.mlp_widths.begin(), spec.mlp_widths.end());
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      const std::string ln = name + ".mlp" + std::to_string(l);
      const auto w = store.add(ln + ".weight", Shape{pr.components, out, in}, false, "projection");
      store.init_normal(w, 1.0 / std::sqrt(static_cast<double>(pr.components * in)), rng);
      pr.mlp_weight.push_back(w);
      pr.mlp_bias.push_back(store.add(ln + ".bias", Shape{out}, false, "projection"));
    }
  }
  return pr;
}

MlpParams Projection::mlp_params(const ParamStore& store) const {
  MlpParams m;
  m.spatial_axes = spatial_axes;
  m.p = p;
  m.widths.push_back(2);
  for (std::size_t l = 0; l < mlp_weight.size(); ++l) {
    const auto& w = store[mlp_weight[l]];
    m.widths.push_back(w.shape[1]);
    m.weight.push_back(w.value);
    m.bias.push_back(store[mlp_bias[l]].value);
  }
  return m;
}

std::vector<Var> Projection::project(Tape& tape, const Binding& params,
                                     std::span<const CVar> logits) const {
  const std::size_t n = logits.size();
  std::vector<Var> out(n);
  switch (spec.kind) {
    case ProjectionKind::norm:
      for (std::size_t k = 0; k < n; ++k) out[k] = tape.sqrt(abs2(logits[k]));
      return out;
    case ProjectionKind::polydec: {
      const auto th = params.real(theta);
      const Var b = params.real(beta)[0];
      for (std::size_t k = 0; k < n; ++k) out[k] = polydec(tape, logits[k], th, b, spec.order);
      return out;
    }
    case ProjectionKind::mlp: {
      if (n != components) throw std::invalid_argument("MLP projection: component count");
      std::vector<Var> x(2 * n);
      for (std::size_t k = 0; k < n; ++k) {
        x[2 * k] = logits[k].re;
        x[2 * k + 1] = logits[k].im;
      }
      const std::size_t layers = mlp_weight.size();
      std::size_t in = 2;
      std::vector<Var> a, w;
      for (std::size_t l = 0; l < layers; ++l) {
        const auto wv = params.real(mlp_weight[l]);
        const auto bv = params.real(mlp_bias[l]);
        const std::size_t out_w = bv.size();
        std::vector<Var> y(n * out_w);
        for (std::size_t k = 0; k < n; ++k) {
          for (std::size_t o = 0; o < out_w; ++o) {
            a.clear();
            w.clear();
            for (std::size_t h = 0; h < n; ++h) {
              const std::size_t g = group_diff(k, h, spatial_axes, p);
              for (std::size_t i = 0; i < in; ++i) {
                w.push_back(wv[(g * out_w + o) * in + i]);
                a.push_back(x[h * in + i]);
              }
            }
            w.push_back(bv[o]);
            a.push_back(tape.one());
            const Var s = tape.dot(w, a);
            y[k * out_w + o] = (l + 1 < layers) ? tape.relu(s) : s;
          }
        }
        x = std::move(y);
        in = out_w;
      }
      return x;
    }
    case ProjectionKind::msoftmax:
    case ProjectionKind::psoftmax:
      break;
  }
  throw std::logic_error("implicit projections have no explicit score");
}

// --- Selector network ----------------------------------------------------------

SelectorNet SelectorNet::create(ParamStore& store, const std::string& name, std::size_t channels,
                                std::size_t spatial_axes, Rng& rng) {
  SelectorNet net;
  net.conv = ConvLayer::create(store, name + ".conv", channels, 1, 3, spatial_axes, false, rng);
  net.act = ModReLU::create(store, name + ".act", 1);
  return net;
}

CVar SelectorNet::forward(ForwardContext& ctx, const VarTensor& component) const {
  if (component.rank() == conv.spatial_axes) {
    Shape s{1};
    s.insert(s.end(), component.shape().begin(), component.shape().end());
    return forward(ctx, component.reshaped(std::move(s)));
  }
  const auto h = act.forward(ctx, conv.forward(ctx, component));
  return global_mean(ctx.tape, h)[0];
}

LpsSelector LpsSelector::create(ParamStore& store, const std::string& name, std::size_t channels,
                                const ProjectionSpec& spec, std::size_t spatial_axes, std::size_t p,
                                Rng& rng) {
  LpsSelector s;
  s.spatial_axes = spatial_axes;
  s.p = p;
  s.net = SelectorNet::create(store, name + ".net", channels, spatial_axes, rng);
  s.proj = Projection::create(store, name + ".proj", spec, spatial_axes, p, rng);
  return s;
}

std::vector<CVar> LpsSelector::logits(ForwardContext& ctx,
                                      std::span<const VarTensor> components) const {
  std::vector<CVar> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(net.forward(ctx, c));
  return out;
}

LpsSelection LpsSelector::select(ForwardContext& ctx, std::span<const VarTensor> components,
                                 std::size_t depth) const {
  Tape& tape = ctx.tape;
  const std::size_t n = components.size();
  if (n != component_count(spatial_axes, p)) {
    throw std::invalid_argument("LpsSelector: expected " +
                                std::to_string(component_count(spatial_axes, p)) +
                                " components, got " + std::to_string(n));
  }
  const auto z = logits(ctx, components);
  std::vector<cplx> zv(n);
  for (std::size_t k = 0; k < n; ++k) zv[k] = z[k].value();

  LpsSelection r;
  if (!proj.spec.implicit()) {
    const auto s = proj.project(tape, ctx.params, z);
    r.scores.resize(n);
    for (std::size_t k = 0; k < n; ++k) r.scores[k] = s[k].value();
    if (!ctx.training) {
      r.k_star = argmax_lowest(r.scores);
      r.probs = softmax(r.scores);
      return r;
    }
    const auto g = ctx.draw_noise(depth, n);
    std::vector<Var> noisy(n);
    std::vector<double> nv(n);
    for (std::size_t k = 0; k < n; ++k) {
      noisy[k] = tape.add_const(s[k], g[k]);
      nv[k] = noisy[k].value();
    }
    const auto soft = cvps::softmax(tape, noisy, ctx.temperature);
    r.k_star = argmax_lowest(nv);
    r.probs.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      r.probs[k] = soft[k].value();
      r.weights.push_back(tape.straight_through(k == r.k_star ? 1.0 : 0.0, soft[k]));
    }
    return r;
  }

  const bool mean = proj.spec.kind == ProjectionKind::msoftmax;
  r.are_probabilities = true;
  if (!ctx.training) {
    r.scores = mean ? msoftmax(zv) : psoftmax(zv);
    r.k_star = argmax_lowest(r.scores);
    r.probs = r.scores;
    return r;
  }
  const auto g = ctx.draw_noise(depth, 2 * n);
  std::vector<Var> re(n), im(n);
  std::vector<cplx> noisy_v(n);
  for (std::size_t k = 0; k < n; ++k) {
    re[k] = tape.add_const(z[k].re, g[k]);
    im[k] = tape.add_const(z[k].im, g[n + k]);
    noisy_v[k] = {re[k].value(), im[k].value()};
  }
  const auto sr = cvps::softmax(tape, re, ctx.temperature);
  const auto si = cvps::softmax(tape, im, ctx.temperature);
  std::vector<Var> y(n);
  r.scores.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    y[k] = mean ? tape.scale(tape.add(sr[k], si[k]), 0.5) : tape.mul(sr[k], si[k]);
    r.scores[k] = y[k].value();
  }
  // At small temperatures y saturates; the unit-temperature scores order the ties.
  const auto unit = mean ? msoftmax(noisy_v) : psoftmax(noisy_v);
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (r.scores[k] > r.scores[best] ||
        (r.scores[k] == r.scores[best] && unit[k] > unit[best])) {
      best = k;
    }
  }
  r.k_star = best;
  r.probs = r.scores;
  for (std::size_t k = 0; k < n; ++k) {
    r.weights.push_back(tape.straight_through(k == best ? 1.0 : 0.0, y[k]));
  }
  return r;
}

Selector make_lps_selector(const LpsSelector& sel, const ParamStore& store) {
  return [sel, &store](std::span<const ComplexTensor> comps) {
    Tape tape(false);
    Binding binding(tape, store);
    ForwardContext ctx(tape, binding);
    std::vector<VarTensor> vc;
    vc.reserve(comps.size());
    for (const auto& c : comps) vc.push_back(constant_tensor(tape, c));
    const auto r = sel.select(ctx, vc, 0);
    return Scores{r.scores, r.are_probabilities};
  };
}

}  // namespace cvps
