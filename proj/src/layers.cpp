#include "cvps/layers.hpp"

#include <cmath>

namespace cvps {

std::vector<double> ForwardContext::draw_noise(std::size_t depth, std::size_t count) {
  if (noise) {
    auto g = noise(depth, count);
    if (g.size() != count) throw std::invalid_argument("noise source returned wrong count");
    return g;
  }
  if (rng == nullptr) throw std::logic_error("training-mode selection needs an rng");
  std::vector<double> g(count);
  for (auto& v : g) v = rng->gumbel();
  return g;
}

// --- convolution -------------------------------------------------------------

ConvLayer ConvLayer::create(ParamStore& store, const std::string& name, std::size_t cin,
                            std::size_t cout, std::size_t kernel, std::size_t spatial_axes,
                            bool real_weights, Rng& rng) {
  if (kernel == 0 || cin == 0 || cout == 0) throw std::invalid_argument("ConvLayer: empty shape");
  ConvLayer l;
  l.in_channels = cin;
  l.out_channels = cout;
  l.kernel = kernel;
  l.spatial_axes = spatial_axes;
  l.real_weights = real_weights;
  Shape ws{cout, cin};
  for (std::size_t a = 0; a < spatial_axes; ++a) ws.push_back(kernel);
  const double fan_in = static_cast<double>(cin * component_count(spatial_axes, kernel));
  const bool cw = !real_weights;
  l.weight = store.add(name + ".weight", ws, cw, "weight");
  store.init_normal(l.weight, cw ? 1.0 / std::sqrt(2.0 * fan_in) : 1.0 / std::sqrt(fan_in), rng);
  l.bias = store.add(name + ".bias", Shape{cout}, cw, "bias");
  return l;
}

VarTensor ConvLayer::forward(ForwardContext& ctx, const VarTensor& x) const {
  if (x.rank() != spatial_axes + 1 || x.dim(0) != in_channels) {
    throw std::invalid_argument("ConvLayer: expected [" + std::to_string(in_channels) +
                                ", spatial x" + std::to_string(spatial_axes) + "], got " +
                                shape_string(x.shape()));
  }
  Tape& tape = ctx.tape;
  const Shape spatial(x.shape().begin() + 1, x.shape().end());
  const std::size_t plane = shape_size(spatial);
  const std::size_t taps = component_count(spatial_axes, kernel);
  const long half = static_cast<long>(kernel / 2);

  // Weights as CVar regardless of storage so one code path serves both layouts.
  std::vector<CVar> w;
  std::vector<CVar> b;
  if (real_weights) {
    for (auto v : ctx.params.real(weight)) w.push_back({v, tape.zero()});
    for (auto v : ctx.params.real(bias)) b.push_back({v, tape.zero()});
  } else {
    auto cw = ctx.params.complex(weight);
    auto cb = ctx.params.complex(bias);
    w.assign(cw.begin(), cw.end());
    b.assign(cb.begin(), cb.end());
  }

  // Source offset of every tap for every output position.
  std::vector<std::size_t> pos(spatial_axes), tap(spatial_axes);
  std::vector<CVar> gathered(in_channels * taps);
  Shape out_shape = x.shape();
  out_shape[0] = out_channels;
  std::vector<CVar> out(out_channels * plane);
  const std::size_t per_out = in_channels * taps;
  for (std::size_t o = 0; o < plane; ++o) {
    std::size_t rem = o;
    for (std::size_t a = spatial_axes; a-- > 0;) {
      pos[a] = rem % spatial[a];
      rem /= spatial[a];
    }
    for (std::size_t t = 0; t < taps; ++t) {
      std::size_t r = t;
      for (std::size_t a = spatial_axes; a-- > 0;) {
        tap[a] = r % kernel;
        r /= kernel;
      }
      std::size_t src = 0;
      for (std::size_t a = 0; a < spatial_axes; ++a) {
        const long n = static_cast<long>(spatial[a]);
        const long idx = ((static_cast<long>(pos[a]) + static_cast<long>(tap[a]) - half) % n + n) % n;
        src = src * spatial[a] + static_cast<std::size_t>(idx);
      }
      for (std::size_t c = 0; c < in_channels; ++c) gathered[c * taps + t] = x[c * plane + src];
    }
    for (std::size_t co = 0; co < out_channels; ++co) {
      out[co * plane + o] = cdot(tape, std::span<const CVar>(w).subspan(co * per_out, per_out),
                                 gathered, b[co], real_weights);
    }
  }
  return VarTensor(std::move(out_shape), std::move(out));
}

// --- activations -------------------------------------------------------------

ModReLU ModReLU::create(ParamStore& store, const std::string& name, std::size_t channels,
                        double init) {
  ModReLU m;
  m.channels = channels;
  m.bias = store.add(name + ".b", Shape{channels}, false, "act_bias");
  store.fill(m.bias, init);
  return m;
}

CVar modrelu(Tape& tape, CVar z, Var b) {
  const Var r2 = abs2(z);
  if (r2.value() == 0.0) return {tape.zero(), tape.zero()};
  const Var r = tape.sqrt(r2);
  const Var m = tape.add(r, b);
  if (m.value() <= 0.0) return {tape.zero(), tape.zero()};
  const Var s = tape.div(m, r);
  return {tape.mul(s, z.re), tape.mul(s, z.im)};
}

VarTensor ModReLU::forward(ForwardContext& ctx, const VarTensor& x) const {
  if (x.rank() < 1 || x.dim(0) != channels) {
    throw std::invalid_argument("ModReLU: channel mismatch");
  }
  auto b = ctx.params.real(bias);
  const std::size_t plane = x.size() / channels;
  std::vector<CVar> out(x.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out[c * plane + i] = modrelu(ctx.tape, x[c * plane + i], b[c]);
    }
  }
  return VarTensor(x.shape(), std::move(out));
}

VarTensor split_relu(Tape& tape, const VarTensor& x) {
  return map(x, [&](const CVar& z) { return CVar{tape.relu(z.re), tape.relu(z.im)}; });
}

ComplexTensor modrelu(const ComplexTensor& z, std::span<const double> bias_per_channel) {
  const std::size_t channels = bias_per_channel.size();
  if (channels == 0 || z.size() % channels != 0) {
    throw std::invalid_argument("modrelu: bias count does not divide the tensor");
  }
  const std::size_t plane = z.size() / channels;
  ComplexTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double r = std::abs(z[i]);
    const double m = r + bias_per_channel[i / plane];
    out[i] = (r > 0.0 && m > 0.0) ? z[i] * (m / r) : cplx{};
  }
  return out;
}

// --- linear ----------------------------------------------------------------

LinearLayer LinearLayer::create(ParamStore& store, const std::string& name, std::size_t in,
                                std::size_t out, bool real_weights, Rng& rng) {
  LinearLayer l;
  l.in_features = in;
  l.out_features = out;
  l.real_weights = real_weights;
  const bool cw = !real_weights;
  l.weight = store.add(name + ".weight", Shape{out, in}, cw, "weight");
  const double fan_in = static_cast<double>(in);
  store.init_normal(l.weight, cw ? 1.0 / std::sqrt(2.0 * fan_in) : 1.0 / std::sqrt(fan_in), rng);
  l.bias = store.add(name + ".bias", Shape{out}, cw, "bias");
  return l;
}

VarTensor LinearLayer::forward(ForwardContext& ctx, const VarTensor& x) const {
  if (x.size() != in_features) throw std::invalid_argument("LinearLayer: width mismatch");
  Tape& tape = ctx.tape;
  std::vector<CVar> w, b;
  if (real_weights) {
    for (auto v : ctx.params.real(weight)) w.push_back({v, tape.zero()});
    for (auto v : ctx.params.real(bias)) b.push_back({v, tape.zero()});
  } else {
    auto cw = ctx.params.complex(weight);
    auto cb = ctx.params.complex(bias);
    w.assign(cw.begin(), cw.end());
    b.assign(cb.begin(), cb.end());
  }
  std::vector<CVar> out(out_features);
  for (std::size_t o = 0; o < out_features; ++o) {
    out[o] = cdot(tape, std::span<const CVar>(w).subspan(o * in_features, in_features),
                  x.data(), b[o], real_weights);
  }
  return VarTensor(Shape{out_features}, std::move(out));
}

// --- pooling -----------------------------------------------------------------

namespace {

template <class T, class Abs>
NdArray<T> cmax_pool_impl(const NdArray<T>& z, std::size_t window, PoolMode mode,
                          std::size_t spatial_axes, Abs&& magnitude) {
  if (spatial_axes == 0 || spatial_axes > z.rank()) {
    throw std::invalid_argument("cmax_pool: bad spatial axis count");
  }
  const std::size_t lead = z.rank() - spatial_axes;
  Shape spatial(z.shape().begin() + static_cast<std::ptrdiff_t>(lead), z.shape().end());
  const std::size_t plane = shape_size(spatial);
  if (plane == 0) throw std::invalid_argument("cmax_pool: empty window");
  const std::size_t outer = z.size() / plane;

  if (mode == PoolMode::global) {
    Shape out_shape(z.shape().begin(), z.shape().begin() + static_cast<std::ptrdiff_t>(lead));
    if (out_shape.empty()) out_shape.push_back(1);
    std::vector<T> out(outer);
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t best = 0;
      double best_abs = magnitude(z[o * plane]);
      for (std::size_t i = 1; i < plane; ++i) {
        const double a = magnitude(z[o * plane + i]);
        if (a > best_abs) {
          best = i;
          best_abs = a;
        }
      }
      out[o] = z[o * plane + best];
    }
    return NdArray<T>(std::move(out_shape), std::move(out));
  }

  if (window == 0) throw std::invalid_argument("cmax_pool: empty window");
  for (auto n : spatial) {
    if (window > n) throw std::invalid_argument("cmax_pool: window exceeds spatial extent");
  }
  const std::size_t taps = component_count(spatial_axes, window);
  std::vector<std::size_t> pos(spatial_axes), off(spatial_axes);
  std::vector<T> out(z.size());
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t rem = p;
    for (std::size_t a = spatial_axes; a-- > 0;) {
      pos[a] = rem % spatial[a];
      rem /= spatial[a];
    }
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t best_src = 0;
      double best_abs = -1.0;
      for (std::size_t t = 0; t < taps; ++t) {
        std::size_t r = t;
        for (std::size_t a = spatial_axes; a-- > 0;) {
          off[a] = r % window;
          r /= window;
        }
        std::size_t src = 0;
        for (std::size_t a = 0; a < spatial_axes; ++a) {
          src = src * spatial[a] + (pos[a] + off[a]) % spatial[a];
        }
        const double m = magnitude(z[o * plane + src]);
        if (m > best_abs) {
          best_abs = m;
          best_src = src;
        }
      }
      out[o * plane + p] = z[o * plane + best_src];
    }
  }
  return NdArray<T>(z.shape(), std::move(out));
}

}  // namespace

VarTensor cmax_pool(const VarTensor& z, std::size_t window, PoolMode mode,
                    std::size_t spatial_axes) {
  return cmax_pool_impl(z, window, mode, spatial_axes, [](const CVar& v) {
    const double re = v.re.value(), im = v.im.value();
    return re * re + im * im;
  });
}

ComplexTensor cmax_pool(const ComplexTensor& z, std::size_t window, PoolMode mode,
                        std::size_t spatial_axes) {
  return cmax_pool_impl(z, window, mode, spatial_axes,
                        [](const cplx& v) { return std::norm(v); });
}

VarTensor global_mean(Tape& tape, const VarTensor& z) {
  if (z.rank() < 2) throw std::invalid_argument("global_mean: expected [C, spatial...]");
  const std::size_t channels = z.dim(0);
  const std::size_t plane = z.size() / channels;
  std::vector<double> coef(plane, 1.0 / static_cast<double>(plane));
  std::vector<Var> re(plane), im(plane);
  std::vector<CVar> out(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      re[i] = z[c * plane + i].re;
      im[i] = z[c * plane + i].im;
    }
    out[c] = {tape.linear(re, coef), tape.linear(im, coef)};
  }
  return VarTensor(Shape{channels}, std::move(out));
}

VarTensor three_tap(Tape& tape, const VarTensor& z, std::size_t spatial_axes, double side,
                    double centre) {
  VarTensor cur = z;
  const double coef[3] = {side, centre, side};
  for (std::size_t a = z.rank() - spatial_axes; a < z.rank(); ++a) {
    const auto prev = circular_shift(cur, a, -1);
    const auto next = circular_shift(cur, a, 1);
    std::vector<CVar> out(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const Var re[3] = {prev[i].re, cur[i].re, next[i].re};
      const Var im[3] = {prev[i].im, cur[i].im, next[i].im};
      out[i] = {tape.linear(re, coef), tape.linear(im, coef)};
    }
    cur = VarTensor(cur.shape(), std::move(out));
  }
  return cur;
}

}  // namespace cvps
