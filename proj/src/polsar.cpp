#include "cvps/polsar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cvps {

namespace {

constexpr cplx kJ{0.0, 1.0};
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Entropy (base 3) of a non-negative weight vector.
double entropy3(std::span<const double> w) {
  double total = 0;
  for (double v : w) total += v;
  double h = 0;
  for (double v : w) {
    if (v <= 0) continue;
    const double p = v / total;
    h -= p * std::log(p);
  }
  return h / std::log(3.0);
}

}  // namespace

double SinclairPixel::frobenius() const {
  return std::sqrt(std::norm(hh) + std::norm(hv) + std::norm(vh) + std::norm(vv));
}

std::array<cplx, 3> PauliVector::k() const {
  return {alpha * kInvSqrt2, beta * kInvSqrt2, gamma * kInvSqrt2};
}

PauliVector pauli_decompose(const SinclairPixel& s) {
  return {s.hh + s.vv, s.hh - s.vv, s.hv + s.vh};
}

SinclairPixel pauli_recompose(const PauliVector& v) {
  const cplx off = 0.5 * v.gamma;
  return {0.5 * (v.alpha + v.beta), off, off, 0.5 * (v.alpha - v.beta)};
}

CircularBasis to_rl_basis(const SinclairPixel& s) {
  const cplx hv = 0.5 * (s.hv + s.vh);
  return {0.5 * (s.hh - s.vv) + kJ * hv, kJ * 0.5 * (s.hh + s.vv), 0.5 * (s.vv - s.hh) + kJ * hv};
}

Krogager krogager_decompose(const SinclairPixel& s) {
  const auto c = to_rl_basis(s);
  const double rr = std::abs(c.rr), ll = std::abs(c.ll);
  Krogager k;
  k.ks = std::abs(c.rl);
  if (rr > ll) {
    k.kh = rr - ll;
    k.kd = ll;
    k.hand = Handedness::left;
  } else {
    k.kh = ll - rr;
    k.kd = rr;
    k.hand = Handedness::right;
  }
  return k;
}

std::string cameron_name(CameronClass c) {
  switch (c) {
    case CameronClass::non_reciprocal: return "non-reciprocal";
    case CameronClass::asymmetric: return "asymmetric";
    case CameronClass::left_helix: return "left helix";
    case CameronClass::right_helix: return "right helix";
    case CameronClass::symmetric: return "symmetric";
    case CameronClass::trihedral: return "trihedral";
    case CameronClass::dihedral: return "dihedral";
    case CameronClass::dipole: return "dipole";
    case CameronClass::cylinder: return "cylinder";
    case CameronClass::narrow_dihedral: return "narrow dihedral";
    case CameronClass::quarter_wave: return "quarter-wave";
    case CameronClass::unclassifiable: return "unclassifiable";
  }
  return "?";
}

double chordal_distance(cplx a, bool a_inf, cplx b, bool b_inf) {
  if (a_inf && b_inf) return 0.0;
  if (a_inf) return 1.0 / std::sqrt(1.0 + std::norm(b));
  if (b_inf) return 1.0 / std::sqrt(1.0 + std::norm(a));
  return std::abs(a - b) / std::sqrt((1.0 + std::norm(a)) * (1.0 + std::norm(b)));
}

CameronResult cameron_classify(const SinclairPixel& s, const CameronConfig& cfg) {
  CameronResult r;
  const double norm = s.frobenius();
  if (norm == 0.0) return r;
  if (std::abs(s.hv - s.vh) > cfg.reciprocity_threshold * norm) {
    r.cls = CameronClass::non_reciprocal;
    return r;
  }
  const auto k = pauli_decompose(s).k();
  const double knorm = std::sqrt(std::norm(k[0]) + std::norm(k[1]) + std::norm(k[2]));

  // Helix content: unequal magnitudes of the two circular components of (k2, k3).
  const double rr = std::abs(k[1] + kJ * k[2]) * kInvSqrt2;
  const double ll = std::abs(k[1] - kJ * k[2]) * kInvSqrt2;
  const double helix = std::abs(rr - ll) / knorm;
  r.tau = std::asin(std::min(1.0, helix));
  if (r.tau > std::numbers::pi / 8) {
    if (helix >= std::cos(std::numbers::pi / 8)) {
      r.cls = rr > ll ? CameronClass::left_helix : CameronClass::right_helix;
    } else {
      r.cls = CameronClass::asymmetric;
    }
    return r;
  }

  // Rotate (k2, k3) onto the direction carrying the most power.
  const double phi =
      0.5 * std::atan2(2.0 * std::real(k[1] * std::conj(k[2])), std::norm(k[1]) - std::norm(k[2]));
  const cplx k2r = std::cos(phi) * k[1] + std::sin(phi) * k[2];
  if (std::abs(k[0]) <= 1e-12 * knorm) {
    r.z_infinite = true;
  } else {
    r.z = k2r / k[0];
    if (r.z.real() < 0) r.z = -r.z;
  }

  struct Proto {
    CameronClass cls;
    cplx z;
    bool inf;
  };
  static const Proto protos[] = {
      {CameronClass::trihedral, {0, 0}, false},    {CameronClass::dihedral, {0, 0}, true},
      {CameronClass::dipole, {1, 0}, false},       {CameronClass::cylinder, {1.0 / 3.0, 0}, false},
      {CameronClass::narrow_dihedral, {3, 0}, false}, {CameronClass::quarter_wave, {0, 1}, false},
      {CameronClass::quarter_wave, {0, -1}, false},
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : protos) {
    const double d = chordal_distance(r.z, r.z_infinite, p.z, p.inf);
    if (d < best) {
      best = d;
      r.cls = p.cls;
    }
  }
  r.distance = best;
  if (best > cfg.symmetric_radius) r.cls = CameronClass::symmetric;
  return r;
}

// --- non-coherent --------------------------------------------------------------

std::vector<CoherencyMatrix> scm_estimate(const ComplexTensor& field, std::size_t window) {
  if (field.rank() != 3 || field.dim(0) != 3) {
    throw std::invalid_argument("scm_estimate: expected a [3, H, W] Pauli field, got " +
                                shape_string(field.shape()));
  }
  if (window == 0 || window % 2 == 0) throw std::invalid_argument("scm_estimate: window must be odd");
  const std::size_t h = field.dim(1), w = field.dim(2);
  if (window > h || window > w) {
    throw std::invalid_argument("scm_estimate: window larger than image");
  }
  const std::size_t plane = h * w;
  const long half = static_cast<long>(window / 2);
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<CoherencyMatrix> out(plane);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      CoherencyMatrix t = CoherencyMatrix::Zero();
      for (long di = -half; di <= half; ++di) {
        const std::size_t ii = static_cast<std::size_t>((static_cast<long>(i) + di + static_cast<long>(h)) % static_cast<long>(h));
        for (long dj = -half; dj <= half; ++dj) {
          const std::size_t jj = static_cast<std::size_t>((static_cast<long>(j) + dj + static_cast<long>(w)) % static_cast<long>(w));
          Eigen::Vector3cd k;
          for (int c = 0; c < 3; ++c) k(c) = field[static_cast<std::size_t>(c) * plane + ii * w + jj];
          t += k * k.adjoint();
        }
      }
      out[i * w + j] = t * inv;
    }
  }
  return out;
}

HAlphaPoint entropy_alpha(const CoherencyMatrix& t) {
  const double trace = t.trace().real();
  if (!(trace > 0.0)) throw std::invalid_argument("entropy_alpha: coherency matrix has zero trace");
  const Eigen::SelfAdjointEigenSolver<CoherencyMatrix> es(t);
  if (es.info() != Eigen::Success) throw std::runtime_error("entropy_alpha: eigensolver failed");
  std::array<double, 3> lambda{};
  for (int i = 0; i < 3; ++i) {
    const double l = es.eigenvalues()(i);
    if (l < -1e-12 * std::max(1.0, trace)) {
      throw std::invalid_argument("entropy_alpha: matrix is not positive semidefinite");
    }
    lambda[static_cast<std::size_t>(i)] = std::max(0.0, l);
  }
  const double total = lambda[0] + lambda[1] + lambda[2];
  HAlphaPoint pt;
  pt.entropy = std::clamp(entropy3(lambda), 0.0, 1.0);
  double alpha = 0;
  for (int i = 0; i < 3; ++i) {
    const auto e = es.eigenvectors().col(i);
    const double first = std::abs(e(0));
    const double rest = std::sqrt(std::norm(e(1)) + std::norm(e(2)));
    alpha += lambda[static_cast<std::size_t>(i)] / total * rad2deg(std::atan2(rest, first));
  }
  pt.alpha_deg = std::clamp(alpha, 0.0, 90.0);
  return pt;
}

namespace {

/// Inverts a monotone increasing entropy curve on [lo, hi] by bisection.
template <class H>
double solve_increasing(H&& entropy, double target, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (entropy(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::array<double, 2> feasible_alpha(double h) {
  h = std::clamp(h, 0.0, 1.0);
  // Lower boundary: eigenvalues (1, m, m) with the dominant one at alpha 0.
  auto low_h = [](double m) {
    const std::array<double, 3> w{1.0, m, m};
    return entropy3(w);
  };
  const double ml = solve_increasing(low_h, h, 0.0, 1.0);
  const double lower = 90.0 * 2.0 * ml / (1.0 + 2.0 * ml);

  // Upper boundary: (0, 1, 2m) up to m = 1/2, then (2m - 1, 1, 1).
  const std::array<double, 2> knee_w{1.0, 1.0};
  const double knee = entropy3(knee_w);
  double upper = 90.0;
  if (h > knee) {
    auto up_h = [](double m) {
      const std::array<double, 3> w{2.0 * m - 1.0, 1.0, 1.0};
      return entropy3(w);
    };
    const double mu = solve_increasing(up_h, h, 0.5, 1.0);
    upper = 180.0 / (2.0 * mu + 1.0);
  }
  return {lower, upper};
}

HAlphaZone halpha_classify(const HAlphaPoint& pt, const HAlphaTable& table) {
  HAlphaZone z;
  const double h = std::clamp(pt.entropy, 0.0, 1.0);
  const auto [lo, hi] = feasible_alpha(h);
  double a = pt.alpha_deg;
  if (a < lo - 1e-9 || a > hi + 1e-9 || h != pt.entropy) z.clamped = true;
  a = std::clamp(a, lo, hi);
  z.alpha_used = a;
  auto band = [&](const std::array<double, 2>& split) { return a >= split[1] ? 0 : (a >= split[0] ? 1 : 2); };
  if (h >= table.h_high) {
    z.zone = 1 + band(table.alpha_high_h);
  } else if (h >= table.h_low) {
    z.zone = 4 + band(table.alpha_mid_h);
  } else {
    z.zone = 7 + band(table.alpha_low_h);
  }
  return z;
}

// --- canonical targets and maps ---------------------------------------------------

std::string mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::sphere: return "sphere";
    case Mechanism::dihedral: return "dihedral";
    case Mechanism::dipole: return "dipole";
    case Mechanism::cylinder: return "cylinder";
    case Mechanism::narrow_dihedral: return "narrow-dihedral";
    case Mechanism::quarter_wave: return "quarter-wave";
    case Mechanism::helix: return "helix";
  }
  return "?";
}

SinclairPixel canonical_sinclair(Mechanism m) {
  switch (m) {
    case Mechanism::sphere: return SinclairPixel::reciprocal(1, 0, 1);
    case Mechanism::dihedral: return SinclairPixel::reciprocal(1, 0, -1);
    case Mechanism::dipole: return SinclairPixel::reciprocal(1, 0, 0);
    case Mechanism::cylinder: return SinclairPixel::reciprocal(1, 0, 0.5);
    case Mechanism::narrow_dihedral: return SinclairPixel::reciprocal(1, 0, -0.5);
    case Mechanism::quarter_wave: return SinclairPixel::reciprocal(1, 0, kJ);
    case Mechanism::helix: return SinclairPixel::reciprocal(0.5, 0.5 * kJ, -0.5);
  }
  throw std::invalid_argument("unknown mechanism");
}

SinclairPixel pixel_at(const ComplexTensor& image, std::size_t i, std::size_t j) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw std::invalid_argument("expected a [3, H, W] HH/HV/VV image, got " +
                                shape_string(image.shape()));
  }
  const std::size_t w = image.dim(2);
  const std::size_t plane = image.dim(1) * w;
  const std::size_t o = i * w + j;
  return SinclairPixel::reciprocal(image[o], image[plane + o], image[2 * plane + o]);
}

ComplexTensor pauli_field(const ComplexTensor& image) {
  ComplexTensor out(image.shape());
  const std::size_t h = image.dim(1), w = image.dim(2), plane = h * w;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const auto k = pauli_decompose(pixel_at(image, i, j)).k();
      for (std::size_t c = 0; c < 3; ++c) out[c * plane + i * w + j] = k[c];
    }
  }
  return out;
}

RealTensor pauli_rgb_planes(const ComplexTensor& image) {
  const ComplexTensor k = pauli_field(image);
  const std::size_t plane = image.dim(1) * image.dim(2);
  RealTensor out(image.shape());
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = std::abs(k[plane + i]);          // |beta| / sqrt 2
    out[plane + i] = std::abs(k[2 * plane + i]);
    out[2 * plane + i] = std::abs(k[i]);
  }
  return out;
}

RealTensor krogager_map(const ComplexTensor& image) {
  const std::size_t h = image.dim(1), w = image.dim(2), plane = h * w;
  RealTensor out(image.shape());
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const auto k = krogager_decompose(pixel_at(image, i, j));
      out[i * w + j] = k.kd;
      out[plane + i * w + j] = k.kh;
      out[2 * plane + i * w + j] = k.ks;
    }
  }
  return out;
}

std::vector<CameronClass> cameron_map(const ComplexTensor& image, const CameronConfig& cfg) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<CameronClass> out(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = cameron_classify(pixel_at(image, i, j), cfg).cls;
  }
  return out;
}

HAlphaMap halpha_map(const ComplexTensor& image, std::size_t window, const HAlphaTable& table) {
  const auto t = scm_estimate(pauli_field(image), window);
  const std::size_t h = image.dim(1), w = image.dim(2);
  HAlphaMap m{RealTensor(Shape{h, w}), RealTensor(Shape{h, w}), std::vector<int>(h * w, 0)};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i].trace().real() > 0.0)) continue;  // empty neighbourhood: zone 0
    const auto pt = entropy_alpha(t[i]);
    m.entropy[i] = pt.entropy;
    m.alpha_deg[i] = pt.alpha_deg;
    m.zones[i] = halpha_classify(pt, table).zone;
  }
  return m;
}

std::vector<std::uint8_t> rgb_composite(const RealTensor& planes, double percentile) {
  if (planes.rank() != 3 || planes.dim(0) != 3) {
    throw std::invalid_argument("rgb_composite: expected [3, H, W]");
  }
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("rgb_composite: percentile must be in (0, 100]");
  }
  const std::size_t plane = planes.dim(1) * planes.dim(2);
  std::vector<std::uint8_t> rgb(plane * 3, 0);
  if (plane == 0) return rgb;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> v(planes.data().begin() + static_cast<std::ptrdiff_t>(c * plane),
                          planes.data().begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(plane)));
    const std::size_t idx = std::min(plane - 1, rank == 0 ? 0 : rank - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
    double scale = v[idx];
    if (!(scale > 0.0)) scale = *std::max_element(v.begin(), v.end());
    if (!(scale > 0.0)) scale = 1.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double x = std::clamp(planes[c * plane + i] / scale, 0.0, 1.0);
      rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(255.0 * x));
    }
  }
  return rgb;
}

}  // namespace cvps
