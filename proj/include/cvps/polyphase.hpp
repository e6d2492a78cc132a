#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvps/ctensor.hpp"
#include "cvps/ndarray.hpp"

namespace cvps {

/**
 * Polyphase component index over the trailing spatial axes.
 * `k[i]` is the phase on spatial axis i; there are p^k.size() components.
 */
struct PolyphaseIndex {
  std::vector<std::size_t> k;
  std::size_t p = 2;

  std::size_t flat() const;
  static PolyphaseIndex from_flat(std::size_t flat, std::size_t spatial_axes,
                                  std::size_t p);
  friend bool operator==(const PolyphaseIndex&, const PolyphaseIndex&) = default;
};

inline std::size_t component_count(std::size_t spatial_axes, std::size_t p) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < spatial_axes; ++i) n *= p;
  return n;
}

/**
 * Where component `k` of z lands after shifting z by `amounts` (per spatial axis):
 * Poly_{index}(T^s z) == T^{offset} Poly_k(z). For p = 2 and a unit shift this is
 * the swap k -> (k + 1) mod 2.
 */
struct ComponentMove {
  PolyphaseIndex index;
  std::vector<long> offset;
};
ComponentMove permute_component(const PolyphaseIndex& k, std::span<const long> amounts);

/// The permutation pi on flat component indices induced by a spatial shift.
std::vector<std::size_t> component_permutation(std::size_t spatial_axes, std::size_t p,
                                               std::span<const long> amounts);

namespace detail {

inline void check_spatial(const Shape& shape, std::size_t spatial_axes) {
  if (spatial_axes == 0 || spatial_axes > shape.size()) {
    throw std::invalid_argument("polyphase: need 1.." + std::to_string(shape.size()) +
                                " spatial axes, got " + std::to_string(spatial_axes));
  }
}

/// Visits (dst_flat, src_flat) pairs of a strided gather on the trailing axes:
/// dst[.., n, ..] = src[.., step*n + phase, ..].
template <class F>
void gather_trailing(const Shape& src_shape, const Shape& dst_shape,
                     std::span<const std::size_t> phase, std::size_t step, F&& visit) {
  const std::size_t rank = src_shape.size();
  const std::size_t spatial = phase.size();
  const std::size_t lead = rank - spatial;
  std::size_t outer = 1;
  for (std::size_t a = 0; a < lead; ++a) outer *= src_shape[a];
  std::size_t src_block = 1, dst_block = 1;
  for (std::size_t a = lead; a < rank; ++a) {
    src_block *= src_shape[a];
    dst_block *= dst_shape[a];
  }
  std::vector<std::size_t> idx(spatial, 0);
  for (std::size_t d = 0; d < dst_block; ++d) {
    std::size_t rem = d;
    for (std::size_t i = spatial; i-- > 0;) {
      idx[i] = rem % dst_shape[lead + i];
      rem /= dst_shape[lead + i];
    }
    std::size_t s = 0;
    for (std::size_t i = 0; i < spatial; ++i) {
      s = s * src_shape[lead + i] + step * idx[i] + phase[i];
    }
    for (std::size_t o = 0; o < outer; ++o) visit(o * dst_block + d, o * src_block + s);
  }
}

}  // namespace detail

/**
 * Downsampling by p on the trailing spatial axes, out[n] = z[p n]; length floor(N/p).
 */
template <class T>
NdArray<T> downsample(const NdArray<T>& z, std::size_t p, std::size_t spatial_axes) {
  if (p < 1) throw std::invalid_argument("downsample: factor must be >= 1");
  detail::check_spatial(z.shape(), spatial_axes);
  Shape out_shape = z.shape();
  const std::size_t lead = z.rank() - spatial_axes;
  for (std::size_t a = lead; a < z.rank(); ++a) out_shape[a] /= p;
  std::vector<T> out(shape_size(out_shape));
  const std::vector<std::size_t> phase(spatial_axes, 0);
  detail::gather_trailing(z.shape(), out_shape, phase, p,
                          [&](std::size_t d, std::size_t s) { out[d] = z[s]; });
  return NdArray<T>(std::move(out_shape), std::move(out));
}

/**
 * k-th polyphase component, Poly_k(z)[n] = z[p n + k] per spatial axis.
 * Spatial lengths must be divisible by p.
 */
template <class T>
NdArray<T> poly(const NdArray<T>& z, const PolyphaseIndex& k) {
  const std::size_t spatial = k.k.size();
  detail::check_spatial(z.shape(), spatial);
  Shape out_shape = z.shape();
  const std::size_t lead = z.rank() - spatial;
  for (std::size_t i = 0; i < spatial; ++i) {
    const std::size_t n = z.dim(lead + i);
    if (n % k.p != 0) {
      throw std::invalid_argument("poly: spatial length " + std::to_string(n) +
                                  " not divisible by " + std::to_string(k.p));
    }
    if (k.k[i] >= k.p) throw std::out_of_range("poly: phase index out of range");
    out_shape[lead + i] = n / k.p;
  }
  std::vector<T> out(shape_size(out_shape));
  detail::gather_trailing(z.shape(), out_shape, k.k, k.p,
                          [&](std::size_t d, std::size_t s) { out[d] = z[s]; });
  return NdArray<T>(std::move(out_shape), std::move(out));
}

/**
 * Partial inverse: places y at phase k of a p-times longer array, zero elsewhere.
 * `target` holds the output spatial lengths, each required to equal p * len(y).
 */
template <class T>
NdArray<T> ipoly(const NdArray<T>& y, const PolyphaseIndex& k,
                 std::span<const std::size_t> target, const T& zero = T{}) {
  const std::size_t spatial = k.k.size();
  detail::check_spatial(y.shape(), spatial);
  if (target.size() != spatial) {
    throw std::invalid_argument("ipoly: target rank mismatch");
  }
  Shape out_shape = y.shape();
  const std::size_t lead = y.rank() - spatial;
  for (std::size_t i = 0; i < spatial; ++i) {
    if (target[i] != k.p * y.dim(lead + i)) {
      throw std::invalid_argument("ipoly: target length " + std::to_string(target[i]) +
                                  " != " + std::to_string(k.p) + " x " +
                                  std::to_string(y.dim(lead + i)));
    }
    if (k.k[i] >= k.p) throw std::out_of_range("ipoly: phase index out of range");
    out_shape[lead + i] = target[i];
  }
  std::vector<T> out(shape_size(out_shape), zero);
  detail::gather_trailing(out_shape, y.shape(), k.k, k.p,
                          [&](std::size_t d, std::size_t s) { out[s] = y[d]; });
  return NdArray<T>(std::move(out_shape), std::move(out));
}

/// All p^d components in flat index order.
template <class T>
std::vector<NdArray<T>> all_components(const NdArray<T>& z, std::size_t spatial_axes,
                                       std::size_t p) {
  std::vector<NdArray<T>> comps;
  const std::size_t n = component_count(spatial_axes, p);
  comps.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    comps.push_back(poly(z, PolyphaseIndex::from_flat(f, spatial_axes, p)));
  }
  return comps;
}

// ---------------------------------------------------------------------------
// Polyphase downsampling / upsampling on plain complex tensors.

/// Selector output. Logit-like scores go through the softmax; selectors that
/// already emit probabilities (MSoftmax / PSoftmax) set `are_probabilities`.
struct Scores {
  std::vector<double> values;
  bool are_probabilities = false;
};

using Selector = std::function<Scores(std::span<const ComplexTensor> components)>;

struct PolyphaseSelection {
  PolyphaseIndex k_star;
  std::vector<double> probs;
  ComplexTensor downsampled;
};

/// Index of the largest value, lowest index on ties.
std::size_t argmax_lowest(std::span<const double> v);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> v);

/// APS selector: l2 norm of each component.
Scores norm_scores(std::span<const ComplexTensor> components);

PolyphaseSelection pd(const ComplexTensor& z, const Selector& selector,
                      std::size_t spatial_axes, std::size_t p = 2);

/// PU: IPoly at the recorded phase; output spatial lengths p times the input's.
ComplexTensor pu(const PolyphaseSelection& sel);

/**
 * Per-forward-pass record of the phases chosen by each PD so that PU at the mirrored
 * depth re-interleaves at the same phase.
 */
class SelectionStack {
 public:
  void push(std::size_t depth, PolyphaseIndex k) { entries_.push_back({depth, std::move(k)}); }
  PolyphaseIndex pop(std::size_t depth);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::size_t depth;
    PolyphaseIndex k;
  };
  std::vector<Entry> entries_;
};

/**
 * Separable [1,2,1]/4 low-pass scaled by p on each spatial axis (kernel
 * [0.5, 1, 0.5] for p = 2), centred, circular.
 */
ComplexTensor lowpass_after_pu(const ComplexTensor& u, std::size_t spatial_axes,
                               std::size_t p = 2);

/// Blur-pool style [1,2,1]/4 filter (unit DC gain), centred, circular.
ComplexTensor blur(const ComplexTensor& u, std::size_t spatial_axes);

enum class SlidingFilter { max_modulus, mean };

/// Stride-1 circular window filter of width `window` per spatial axis; the window
/// at n covers n .. n + window - 1.
ComplexTensor sliding_filter(const ComplexTensor& z, std::size_t window,
                             std::size_t spatial_axes, SlidingFilter kind);

/// Sliding stride-1 filter followed by fixed-phase downsampling. This is the
/// non-equivariant control used by audits.
ComplexTensor strided_baseline(const ComplexTensor& z, std::size_t p,
                               std::size_t spatial_axes,
                               SlidingFilter kind = SlidingFilter::max_modulus,
                               std::size_t window = 2);

}  // namespace cvps
