#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cvps/polsar.hpp"
#include "support.hpp"

using namespace cvps;
using cvps::testing::random_tensor;

namespace {

constexpr cplx kJ{0, 1};

SinclairPixel random_pixel(Rng& rng) {
  auto c = [&] { return cplx{rng.normal(), rng.normal()}; };
  return SinclairPixel::reciprocal(c(), c(), c());
}

/// R(t) S R(t)^T, the scattering matrix of the target rotated about the line of sight.
SinclairPixel rotate(const SinclairPixel& s, double t) {
  Eigen::Matrix2cd m;
  m << s.hh, s.hv, s.vh, s.vv;
  Eigen::Matrix2cd r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const Eigen::Matrix2cd o = r * m * r.transpose();
  return {o(0, 0), o(0, 1), o(1, 0), o(1, 1)};
}

CoherencyMatrix outer(const std::array<cplx, 3>& k) {
  Eigen::Vector3cd v(k[0], k[1], k[2]);
  return v * v.adjoint();
}

}  // namespace

TEST_CASE("Pauli decomposition") {
  const auto sphere = pauli_decompose(SinclairPixel::reciprocal(1, 0, 1));
  CHECK(sphere.alpha == cplx{2});
  CHECK(sphere.beta == cplx{0});
  CHECK(sphere.gamma == cplx{0});
  const auto k = sphere.k();
  CHECK(std::abs(k[0] - cplx{std::numbers::sqrt2}) < 1e-15);

  const auto dihedral = pauli_decompose(SinclairPixel::reciprocal(1, 0, -1));
  CHECK(dihedral.beta == cplx{2});
  CHECK(dihedral.alpha == cplx{0});
  CHECK(dihedral.gamma == cplx{0});

  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const SinclairPixel s{{rng.normal(), rng.normal()},
                          {rng.normal(), rng.normal()},
                          {rng.normal(), rng.normal()},
                          {rng.normal(), rng.normal()}};
    const auto r = pauli_recompose(pauli_decompose(s));
    CHECK(std::abs(r.hh - s.hh) <= 1e-15 * (1 + std::abs(s.hh)));
    CHECK(std::abs(r.vv - s.vv) <= 1e-15 * (1 + std::abs(s.vv)));
    CHECK(std::abs(r.hv + r.vh - s.hv - s.vh) <= 2e-15 * (1 + std::abs(s.hv + s.vh)));
  }
}

TEST_CASE("circular basis") {
  const auto sphere = to_rl_basis(SinclairPixel::reciprocal(1, 0, 1));
  CHECK(sphere.rl == kJ);
  CHECK(sphere.rr == cplx{0});
  CHECK(sphere.ll == cplx{0});
  const auto dihedral = to_rl_basis(SinclairPixel::reciprocal(1, 0, -1));
  CHECK(std::abs(dihedral.rr) == doctest::Approx(1.0));
  CHECK(std::abs(dihedral.ll) == doctest::Approx(1.0));
  CHECK(dihedral.rl == cplx{0});
  const auto zero = to_rl_basis(SinclairPixel::reciprocal(0, 0, 0));
  CHECK(zero.rr == cplx{0});
  CHECK(zero.rl == cplx{0});
  CHECK(zero.ll == cplx{0});

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_pixel(rng);
    const auto c = to_rl_basis(s);
    // The change of basis is unitary up to the 1/2 scaling: span norm is kept.
    const double lhs = std::norm(c.rr) + 2 * std::norm(c.rl) + std::norm(c.ll);
    CHECK(lhs == doctest::Approx(std::pow(s.frobenius(), 2)));
  }
}

TEST_CASE("Krogager") {
  const auto sphere = krogager_decompose(SinclairPixel::reciprocal(1, 0, 1));
  CHECK(sphere.ks == doctest::Approx(1.0));
  CHECK(sphere.kd == doctest::Approx(0.0));
  CHECK(sphere.kh == doctest::Approx(0.0));
  const auto dihedral = krogager_decompose(SinclairPixel::reciprocal(1, 0, -1));
  CHECK(dihedral.ks == doctest::Approx(0.0));
  CHECK(dihedral.kd == doctest::Approx(1.0));
  CHECK(dihedral.kh == doctest::Approx(0.0));
  const auto helix = krogager_decompose(SinclairPixel::reciprocal(0.5, 0.5 * kJ, -0.5));
  CHECK(helix.ks == doctest::Approx(0.0));
  CHECK(helix.kd == doctest::Approx(0.0));
  CHECK(helix.kh == doctest::Approx(1.0));
  const auto other = krogager_decompose(SinclairPixel::reciprocal(0.5, -0.5 * kJ, -0.5));
  CHECK(other.kh == doctest::Approx(1.0));
  CHECK(other.hand != helix.hand);

  SUBCASE("rotation changes neither k_s, k_d nor k_h") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const auto s = random_pixel(rng);
      const auto a = krogager_decompose(s);
      const auto b = krogager_decompose(rotate(s, rng.uniform(0, 3)));
      CHECK(b.ks == doctest::Approx(a.ks));
      CHECK(b.kd == doctest::Approx(a.kd));
      CHECK(b.kh == doctest::Approx(a.kh));
    }
  }
}

TEST_CASE("Cameron") {
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, 1)).cls == CameronClass::trihedral);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, -1)).cls == CameronClass::dihedral);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, 0)).cls == CameronClass::dipole);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, 0.5)).cls == CameronClass::cylinder);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, -0.5)).cls ==
        CameronClass::narrow_dihedral);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, kJ)).cls == CameronClass::quarter_wave);
  const auto lh = cameron_classify(SinclairPixel::reciprocal(0.5, 0.5 * kJ, -0.5)).cls;
  const auto rh = cameron_classify(SinclairPixel::reciprocal(0.5, -0.5 * kJ, -0.5)).cls;
  CHECK((lh == CameronClass::left_helix || lh == CameronClass::right_helix));
  CHECK((rh == CameronClass::left_helix || rh == CameronClass::right_helix));
  CHECK(lh != rh);
  CHECK(cameron_classify(SinclairPixel{1, 0.5, -0.5, 1}).cls == CameronClass::non_reciprocal);
  CHECK(cameron_classify(SinclairPixel::reciprocal(0, 0, 0)).cls == CameronClass::unclassifiable);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, 0.05)).cls != CameronClass::asymmetric);

  const auto tri = cameron_classify(SinclairPixel::reciprocal(1, 0, 1));
  CHECK(std::abs(tri.z) < 1e-15);
  CHECK(cameron_classify(SinclairPixel::reciprocal(1, 0, -1)).z_infinite);

  SUBCASE("invariant to global phase, positive scaling and rotation") {
    Rng rng(4);
    const Mechanism symmetric[] = {Mechanism::sphere, Mechanism::dihedral, Mechanism::dipole,
                                   Mechanism::cylinder, Mechanism::narrow_dihedral,
                                   Mechanism::quarter_wave};
    for (auto m : symmetric) {
      const auto s = canonical_sinclair(m);
      const auto base = cameron_classify(s).cls;
      for (int i = 0; i < 20; ++i) {
        const cplx c = std::polar(rng.uniform(0.1, 10.0), rng.uniform(-3.0, 3.0));
        CHECK(cameron_classify(s * c).cls == base);
        CHECK(cameron_classify(rotate(s, rng.uniform(0.0, std::numbers::pi))).cls == base);
      }
    }
  }
  SUBCASE("random pixels follow the shared z") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      const auto s = random_pixel(rng);
      const auto a = cameron_classify(s);
      const auto b = cameron_classify(s * std::polar(2.5, 1.1));
      CHECK(a.cls == b.cls);
      CHECK(a.tau == doctest::Approx(b.tau));
    }
  }
}

TEST_CASE("chordal distance") {
  CHECK(chordal_distance(0, false, 0, true) == doctest::Approx(1.0));
  CHECK(chordal_distance(1, false, 1, false) == 0.0);
  CHECK(chordal_distance(0, true, 0, true) == 0.0);
  CHECK(chordal_distance(kJ, false, -kJ, false) == doctest::Approx(1.0));
  CHECK(chordal_distance(2, false, 0, true) == doctest::Approx(1 / std::sqrt(5.0)));
}

TEST_CASE("sample coherency matrix") {
  Rng rng(6);
  SUBCASE("constant field gives the rank-1 outer product") {
    ComplexTensor f(Shape{3, 5, 5});
    const std::array<cplx, 3> k{cplx{1, 2}, cplx{0.5, -1}, cplx{0, 3}};
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < 25; ++i) f[c * 25 + i] = k[c];
    }
    const auto t = scm_estimate(f, 3);
    CHECK((t[12] - outer(k)).norm() < 1e-13);
    Eigen::SelfAdjointEigenSolver<CoherencyMatrix> es(t[7]);
    CHECK(std::abs(es.eigenvalues()(0)) < 1e-12);
    CHECK(std::abs(es.eigenvalues()(1)) < 1e-12);
  }
  SUBCASE("window 1 is the per-pixel outer product") {
    const auto f = random_tensor({3, 4, 6}, rng);
    const auto t = scm_estimate(f, 1);
    for (std::size_t i = 0; i < 24; ++i) {
      CHECK((t[i] - outer({f[i], f[24 + i], f[48 + i]})).norm() < 1e-14);
    }
  }
  SUBCASE("matches a brute-force double loop") {
    const std::size_t h = 6, w = 7, n = 5;
    const auto f = random_tensor({3, h, w}, rng);
    const auto t = scm_estimate(f, n);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        CoherencyMatrix acc = CoherencyMatrix::Zero();
        for (long di = -2; di <= 2; ++di) {
          for (long dj = -2; dj <= 2; ++dj) {
            const std::size_t ii = (i + h + di) % h, jj = (j + w + dj) % w;
            const std::size_t o = ii * w + jj;
            acc += outer({f[o], f[h * w + o], f[2 * h * w + o]});
          }
        }
        acc /= double(n * n);
        CHECK((t[i * w + j] - acc).norm() <= 1e-12);
      }
    }
  }
  CHECK_THROWS(scm_estimate(random_tensor({3, 4, 4}, rng), 2));
}

TEST_CASE("entropy and alpha") {
  const auto sphere = entropy_alpha(outer({cplx{1.4}, 0, 0}));
  CHECK(sphere.entropy < 1e-10);
  CHECK(sphere.alpha_deg < 1e-6);
  const auto dihedral = entropy_alpha(outer({0, cplx{0, 1.4}, 0}));
  CHECK(dihedral.entropy < 1e-10);
  CHECK(dihedral.alpha_deg == doctest::Approx(90.0).epsilon(1e-9));
  const auto uniform = entropy_alpha(CoherencyMatrix::Identity() * 2.0);
  CHECK(uniform.entropy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uniform.alpha_deg == doctest::Approx(60.0));

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Matrix3cd a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = {rng.normal(), rng.normal()};
    const auto pt = entropy_alpha(a * a.adjoint());
    CHECK(pt.entropy >= 0.0);
    CHECK(pt.entropy <= 1.0);
    CHECK(pt.alpha_deg >= 0.0);
    CHECK(pt.alpha_deg <= 90.0);
  }
  CoherencyMatrix bad = CoherencyMatrix::Identity();
  bad(2, 2) = -1;
  CHECK_THROWS(entropy_alpha(bad));
}

TEST_CASE("H-alpha zones") {
  CHECK(halpha_classify({0.1, 10}).zone == 9);
  CHECK(halpha_classify({0.95, 45}).zone == 2);
  CHECK(halpha_classify({0.0, 90}).zone == 7);
  CHECK(halpha_classify({0.3, 45}).zone == 8);
  CHECK(halpha_classify({0.7, 60}).zone == 4);
  CHECK(halpha_classify({0.7, 45}).zone == 5);
  CHECK(halpha_classify({0.7, 30}).zone == 6);
  CHECK(halpha_classify({0.95, 60}).zone == 1);

  const auto clamped = halpha_classify({0.99, 10});
  CHECK(clamped.clamped);
  CHECK(clamped.alpha_used == doctest::Approx(feasible_alpha(0.99)[0]));
  CHECK(clamped.zone == halpha_classify({0.99, feasible_alpha(0.99)[0]}).zone);
  CHECK_FALSE(halpha_classify({0.1, 10}).clamped);

  const auto lo = feasible_alpha(0.0);
  CHECK(lo[0] == doctest::Approx(0.0));
  CHECK(lo[1] == doctest::Approx(90.0));
  const auto hi = feasible_alpha(1.0);
  CHECK(hi[0] == doctest::Approx(60.0).epsilon(1e-6));
  CHECK(hi[1] == doctest::Approx(60.0).epsilon(1e-6));
}

TEST_CASE("image maps") {
  ComplexTensor img(Shape{3, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    img[i] = 1;
    img[8 + i] = 1;
  }
  const auto rgb = pauli_rgb_planes(img);
  CHECK(rgb[8] == doctest::Approx(2 / std::numbers::sqrt2));
  CHECK(rgb[0] == 0.0);
  const auto bytes = rgb_composite(rgb);
  REQUIRE(bytes.size() == 12);
  CHECK(bytes[2] == 255);
  CHECK(bytes[0] == 0);
  const auto cls = cameron_map(img);
  for (auto c : cls) CHECK(c == CameronClass::trihedral);
  const auto kr = krogager_map(img);
  CHECK(kr[8] == doctest::Approx(1.0));  // k_s plane
  const auto ha = halpha_map(img, 1);
  for (int z : ha.zones) CHECK(z == 9);
}
