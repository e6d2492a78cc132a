#include "cvps/ctensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cvps/polyphase.hpp"

namespace cvps {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

ComplexTensor hadamard(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("hadamard: shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
  ComplexTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

namespace {

// Single-channel circular correlation over all axes of x.
void correlate_into(std::span<const cplx> x, const Shape& xs, std::span<const cplx> k,
                    const Shape& ks, std::span<cplx> out) {
  const std::size_t rank = xs.size();
  const std::size_t n = x.size();
  const std::size_t m = k.size();
  std::vector<std::size_t> xi(rank), ki(rank);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t rem = o;
    for (std::size_t a = rank; a-- > 0;) {
      xi[a] = rem % xs[a];
      rem /= xs[a];
    }
    cplx acc{};
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t r = j;
      for (std::size_t a = rank; a-- > 0;) {
        ki[a] = r % ks[a];
        r /= ks[a];
      }
      std::size_t src = 0;
      for (std::size_t a = 0; a < rank; ++a) src = src * xs[a] + (xi[a] + ki[a]) % xs[a];
      acc += k[j] * x[src];
    }
    out[o] += acc;
  }
}

}  // namespace

ComplexTensor conv_circular(const ComplexTensor& x, const ComplexTensor& kernel,
                            std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("conv_circular: stride must be >= 1");
  if (kernel.size() == 0) throw std::invalid_argument("conv_circular: empty kernel");

  if (kernel.rank() == x.rank()) {
    for (std::size_t a = 0; a < x.rank(); ++a) {
      if (kernel.dim(a) > x.dim(a)) {
        throw std::invalid_argument("conv_circular: kernel larger than input");
      }
    }
    ComplexTensor out(x.shape());
    correlate_into(x.data(), x.shape(), kernel.data(), kernel.shape(), out.data());
    return stride == 1 ? out : downsample(out, stride, x.rank());
  }

  if (kernel.rank() != x.rank() + 1 || x.rank() < 2) {
    throw std::invalid_argument("conv_circular: kernel rank " +
                                std::to_string(kernel.rank()) + " incompatible with input rank " +
                                std::to_string(x.rank()));
  }
  const std::size_t cin = x.dim(0);
  const std::size_t cout = kernel.dim(0);
  if (kernel.dim(1) != cin) {
    throw std::invalid_argument("conv_circular: kernel expects " +
                                std::to_string(kernel.dim(1)) + " input channels, got " +
                                std::to_string(cin));
  }
  const Shape xs(x.shape().begin() + 1, x.shape().end());
  const Shape ks(kernel.shape().begin() + 2, kernel.shape().end());
  for (std::size_t a = 0; a < xs.size(); ++a) {
    if (ks[a] > xs[a]) throw std::invalid_argument("conv_circular: kernel larger than input");
  }
  const std::size_t plane = shape_size(xs);
  const std::size_t kplane = shape_size(ks);
  Shape os = x.shape();
  os[0] = cout;
  ComplexTensor out(os);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      correlate_into(x.data().subspan(ci * plane, plane), xs,
                     kernel.data().subspan((co * cin + ci) * kplane, kplane), ks,
                     out.data().subspan(co * plane, plane));
    }
  }
  return stride == 1 ? out : downsample(out, stride, xs.size());
}

RealTensor modulus(const ComplexTensor& t) {
  return map(t, [](const cplx& z) { return std::abs(z); });
}

RealTensor arg(const ComplexTensor& t) {
  return map(t, [](const cplx& z) { return std::atan2(z.imag(), z.real()); });
}

namespace {

template <class T>
T pairwise(std::span<const T> v) {
  if (v.size() <= 8) {
    T acc{};
    for (const auto& x : v) acc += x;
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace

double pairwise_sum(std::span<const double> v) { return pairwise(v); }
cplx pairwise_sum(std::span<const cplx> v) { return pairwise(v); }

double norm_l2(const ComplexTensor& t) {
  std::vector<double> sq(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) sq[i] = std::norm(t[i]);
  return std::sqrt(pairwise_sum(sq));
}

ComplexTensor global_pool(const ComplexTensor& t, PoolKind kind, bool channel_axis) {
  const std::size_t channels = (channel_axis && t.rank() > 1) ? t.dim(0) : 1;
  const std::size_t plane = channels ? t.size() / channels : 0;
  ComplexTensor out(Shape{channels});
  for (std::size_t c = 0; c < channels; ++c) {
    cplx s = pairwise_sum(t.data().subspan(c * plane, plane));
    if (kind == PoolKind::mean && plane > 0) s /= static_cast<double>(plane);
    out[c] = s;
  }
  return out;
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

bool all_finite(const ComplexTensor& t) {
  return std::all_of(t.storage().begin(), t.storage().end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

}  // namespace cvps
