#include "cvps/polyphase.hpp"

#include <algorithm>
#include <cmath>

namespace cvps {

std::size_t PolyphaseIndex::flat() const {
  std::size_t f = 0;
  for (auto ki : k) f = f * p + ki;
  return f;
}

PolyphaseIndex PolyphaseIndex::from_flat(std::size_t flat, std::size_t spatial_axes,
                                         std::size_t p) {
  PolyphaseIndex idx{std::vector<std::size_t>(spatial_axes, 0), p};
  for (std::size_t i = spatial_axes; i-- > 0;) {
    idx.k[i] = flat % p;
    flat /= p;
  }
  return idx;
}

ComponentMove permute_component(const PolyphaseIndex& k, std::span<const long> amounts) {
  if (amounts.size() != k.k.size()) {
    throw std::invalid_argument("permute_component: shift rank mismatch");
  }
  // Poly_j(T^s z)[n] = z[p n + j + s]; writing j + s = p q + k gives
  // Poly_j(T^s z) = T^q Poly_k(z) with j = (k - s) mod p.
  const auto p = static_cast<long>(k.p);
  ComponentMove mv{PolyphaseIndex{std::vector<std::size_t>(k.k.size()), k.p},
                   std::vector<long>(k.k.size())};
  for (std::size_t i = 0; i < k.k.size(); ++i) {
    const long ki = static_cast<long>(k.k[i]);
    const long j = (((ki - amounts[i]) % p) + p) % p;
    mv.index.k[i] = static_cast<std::size_t>(j);
    const long num = j + amounts[i] - ki;  // exact multiple of p
    mv.offset[i] = num / p;
  }
  return mv;
}

std::vector<std::size_t> component_permutation(std::size_t spatial_axes, std::size_t p,
                                               std::span<const long> amounts) {
  const std::size_t n = component_count(spatial_axes, p);
  std::vector<std::size_t> perm(n);
  for (std::size_t f = 0; f < n; ++f) {
    perm[f] = permute_component(PolyphaseIndex::from_flat(f, spatial_axes, p), amounts)
                  .index.flat();
  }
  return perm;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (auto& o : out) o /= s;
  return out;
}

Scores norm_scores(std::span<const ComplexTensor> components) {
  Scores s;
  s.values.reserve(components.size());
  for (const auto& c : components) s.values.push_back(norm_l2(c));
  return s;
}

PolyphaseSelection pd(const ComplexTensor& z, const Selector& selector,
                      std::size_t spatial_axes, std::size_t p) {
  auto comps = all_components(z, spatial_axes, p);
  Scores scores = selector(comps);
  if (scores.values.size() != comps.size()) {
    throw std::invalid_argument("pd: selector returned " +
                                std::to_string(scores.values.size()) + " scores for " +
                                std::to_string(comps.size()) + " components");
  }
  PolyphaseSelection sel;
  sel.probs = scores.are_probabilities ? scores.values : softmax(scores.values);
  const std::size_t k = argmax_lowest(scores.values);
  sel.k_star = PolyphaseIndex::from_flat(k, spatial_axes, p);
  sel.downsampled = std::move(comps[k]);
  return sel;
}

ComplexTensor pu(const PolyphaseSelection& sel) {
  const auto& y = sel.downsampled;
  const std::size_t spatial = sel.k_star.k.size();
  if (spatial == 0) throw std::invalid_argument("pu: missing selection record");
  std::vector<std::size_t> target(spatial);
  for (std::size_t i = 0; i < spatial; ++i) {
    target[i] = sel.k_star.p * y.dim(y.rank() - spatial + i);
  }
  return ipoly(y, sel.k_star, target);
}

PolyphaseIndex SelectionStack::pop(std::size_t depth) {
  if (entries_.empty()) {
    throw std::logic_error("SelectionStack: no selection recorded for depth " +
                           std::to_string(depth));
  }
  Entry e = std::move(entries_.back());
  entries_.pop_back();
  if (e.depth != depth) {
    throw std::logic_error("SelectionStack: expected depth " + std::to_string(depth) +
                           ", top of stack is depth " + std::to_string(e.depth));
  }
  return std::move(e.k);
}

namespace {

// Centred 3-tap circular filter applied along every spatial axis.
ComplexTensor three_tap(const ComplexTensor& u, std::size_t spatial_axes, double side,
                        double centre) {
  detail::check_spatial(u.shape(), spatial_axes);
  ComplexTensor cur = u;
  for (std::size_t a = u.rank() - spatial_axes; a < u.rank(); ++a) {
    const auto prev = circular_shift(cur, a, -1);
    const auto next = circular_shift(cur, a, 1);
    ComplexTensor out(cur.shape());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      out[i] = side * prev[i] + centre * cur[i] + side * next[i];
    }
    cur = std::move(out);
  }
  return cur;
}

}  // namespace

ComplexTensor lowpass_after_pu(const ComplexTensor& u, std::size_t spatial_axes,
                               std::size_t p) {
  const double scale = static_cast<double>(p);
  return three_tap(u, spatial_axes, 0.25 * scale, 0.5 * scale);
}

ComplexTensor blur(const ComplexTensor& u, std::size_t spatial_axes) {
  return three_tap(u, spatial_axes, 0.25, 0.5);
}

ComplexTensor sliding_filter(const ComplexTensor& z, std::size_t window,
                             std::size_t spatial_axes, SlidingFilter kind) {
  if (window == 0) throw std::invalid_argument("sliding_filter: empty window");
  detail::check_spatial(z.shape(), spatial_axes);
  const std::size_t lead = z.rank() - spatial_axes;
  for (std::size_t a = lead; a < z.rank(); ++a) {
    if (window > z.dim(a)) throw std::invalid_argument("sliding_filter: window exceeds extent");
  }
  // Shifted copies in window order; lowest window offset wins ties.
  std::vector<ComplexTensor> taps;
  const std::size_t count = component_count(spatial_axes, window);
  taps.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    auto off = PolyphaseIndex::from_flat(t, spatial_axes, window);
    std::vector<long> amounts(off.k.begin(), off.k.end());
    taps.push_back(shift_spatial(z, std::span<const long>(amounts)));
  }
  ComplexTensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (kind == SlidingFilter::max_modulus) {
      std::size_t best = 0;
      double best_abs = std::abs(taps[0][i]);
      for (std::size_t t = 1; t < count; ++t) {
        const double a = std::abs(taps[t][i]);
        if (a > best_abs) {
          best = t;
          best_abs = a;
        }
      }
      out[i] = taps[best][i];
    } else {
      cplx s{};
      for (std::size_t t = 0; t < count; ++t) s += taps[t][i];
      out[i] = s / static_cast<double>(count);
    }
  }
  return out;
}

ComplexTensor strided_baseline(const ComplexTensor& z, std::size_t p,
                               std::size_t spatial_axes, SlidingFilter kind,
                               std::size_t window) {
  return downsample(sliding_filter(z, window, spatial_axes, kind), p, spatial_axes);
}

}  // namespace cvps
