#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvps/ctensor.hpp"

namespace cvps {

/// 2x2 scattering matrix of one pixel in the H/V basis.
struct SinclairPixel {
  cplx hh, hv, vh, vv;

  /// Monostatic pixel with hv == vh.
  static SinclairPixel reciprocal(cplx hh, cplx hv, cplx vv) { return {hh, hv, hv, vv}; }
  double frobenius() const;
  SinclairPixel operator*(cplx c) const { return {hh * c, hv * c, vh * c, vv * c}; }
};

/// alpha = hh + vv, beta = hh - vv, gamma = hv + vh (2 hv under reciprocity).
struct PauliVector {
  cplx alpha, beta, gamma;

  /// k = (alpha, beta, gamma) / sqrt(2).
  std::array<cplx, 3> k() const;
};

PauliVector pauli_decompose(const SinclairPixel& s);
SinclairPixel pauli_recompose(const PauliVector& v);

struct CircularBasis {
  cplx rr, rl, ll;
};

CircularBasis to_rl_basis(const SinclairPixel& s);

enum class Handedness { left, right };

struct Krogager {
  double ks = 0, kd = 0, kh = 0;
  Handedness hand = Handedness::right;
};

Krogager krogager_decompose(const SinclairPixel& s);

enum class CameronClass {
  non_reciprocal,
  asymmetric,
  left_helix,
  right_helix,
  symmetric,
  trihedral,
  dihedral,
  dipole,
  cylinder,
  narrow_dihedral,
  quarter_wave,
  unclassifiable,
};

std::string cameron_name(CameronClass c);

struct CameronConfig {
  double reciprocity_threshold = 0.05;  ///< |hv - vh| relative to ||S||_F
  double symmetric_radius = 0.35;       ///< chordal radius around symmetric prototypes
};

struct CameronResult {
  CameronClass cls = CameronClass::unclassifiable;
  cplx z;                   ///< symmetric descriptor after de-rotation; infinite for k1 = 0
  bool z_infinite = false;
  double tau = 0;           ///< asymmetry angle in radians
  double distance = 0;      ///< chordal distance to the chosen prototype
};

/// |a - b| / sqrt((1 + |a|^2)(1 + |b|^2)); infinity is handled as the north pole.
double chordal_distance(cplx a, bool a_inf, cplx b, bool b_inf);

CameronResult cameron_classify(const SinclairPixel& s, const CameronConfig& cfg = {});

// ---------------------------------------------------------------------------
// Non-coherent: coherency matrix, entropy and alpha.

using CoherencyMatrix = Eigen::Matrix3cd;

/**
 * Boxcar sample covariance of a Pauli field [3, H, W] with an odd, circular window.
 * Returns H*W matrices in row-major pixel order.
 */
std::vector<CoherencyMatrix> scm_estimate(const ComplexTensor& pauli_field, std::size_t window);

struct HAlphaPoint {
  double entropy = 0;
  double alpha_deg = 0;
};

HAlphaPoint entropy_alpha(const CoherencyMatrix& t);

/// Zone boundaries; zones follow the usual numbering (9 = low-entropy surface).
struct HAlphaTable {
  double h_low = 0.5, h_high = 0.9;
  std::array<double, 2> alpha_low_h{42.5, 47.5};
  std::array<double, 2> alpha_mid_h{40.0, 50.0};
  std::array<double, 2> alpha_high_h{40.0, 55.0};
};

struct HAlphaZone {
  int zone = 0;
  bool clamped = false;  ///< point moved onto the feasible region first
  double alpha_used = 0;
};

/// Lowest and highest alpha (degrees) reachable at entropy h.
std::array<double, 2> feasible_alpha(double h);

HAlphaZone halpha_classify(const HAlphaPoint& pt, const HAlphaTable& table = {});

// ---------------------------------------------------------------------------
// Canonical targets and image-level maps.

enum class Mechanism { sphere, dihedral, dipole, cylinder, narrow_dihedral, quarter_wave, helix };
constexpr std::size_t kMechanismCount = 7;

std::string mechanism_name(Mechanism m);
SinclairPixel canonical_sinclair(Mechanism m);

/// Image [3, H, W] holding HH, HV, VV (reciprocal) -> pixel at (i, j).
SinclairPixel pixel_at(const ComplexTensor& image, std::size_t i, std::size_t j);

/// [3, H, W] HH/HV/VV image -> [3, H, W] Pauli k field.
ComplexTensor pauli_field(const ComplexTensor& image);

/// [3, H, W] real maps (k_d, k_h, k_s order, the usual RGB order).
RealTensor krogager_map(const ComplexTensor& image);

std::vector<CameronClass> cameron_map(const ComplexTensor& image, const CameronConfig& cfg = {});

struct HAlphaMap {
  RealTensor entropy;
  RealTensor alpha_deg;
  std::vector<int> zones;
};

HAlphaMap halpha_map(const ComplexTensor& image, std::size_t window,
                     const HAlphaTable& table = {});

/**
 * 8-bit RGB composite of three real planes [3, H, W], each divided by its own
 * `percentile` value and clipped to [0, 1]. Output is H*W*3 interleaved bytes.
 */
std::vector<std::uint8_t> rgb_composite(const RealTensor& planes, double percentile = 99.0);

/// Pauli composite planes: R = |beta|, G = |gamma|, B = |alpha|.
RealTensor pauli_rgb_planes(const ComplexTensor& image);

}  // namespace cvps
