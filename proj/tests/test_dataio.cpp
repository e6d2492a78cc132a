#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "cvps/dataio.hpp"
#include "cvps/polsar.hpp"
#include "support.hpp"

using namespace cvps;
using cvps::testing::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cvps_test_" + name);
}

CameronClass expected_cameron(Mechanism m) {
  switch (m) {
    case Mechanism::sphere: return CameronClass::trihedral;
    case Mechanism::dihedral: return CameronClass::dihedral;
    case Mechanism::dipole: return CameronClass::dipole;
    case Mechanism::cylinder: return CameronClass::cylinder;
    case Mechanism::narrow_dihedral: return CameronClass::narrow_dihedral;
    case Mechanism::quarter_wave: return CameronClass::quarter_wave;
    case Mechanism::helix: break;
  }
  return CameronClass::left_helix;
}

}  // namespace

TEST_CASE("CPLX byte layout") {
  const ComplexTensor t(Shape{2}, {cplx{1.0, -2.0}, cplx{0.5, 0.0}});
  const auto b = encode_cplx(t, "{}");
  REQUIRE(b.size() == 4 + 1 + 1 + 4 + 16 + 4 + 2);
  CHECK(std::memcmp(b.data(), "CPLX", 4) == 0);
  CHECK(b[4] == 1);
  CHECK(b[5] == 1);
  CHECK(b[6] == 2);
  CHECK(b[7] == 0);
  float re = 0;
  std::memcpy(&re, b.data() + 10, 4);  // host is little-endian in this build
  CHECK(re == 1.0f);
  CHECK(b[26] == 2);
  CHECK(b[30] == '{');
}

TEST_CASE("CPLX round trips") {
  Rng rng(1);
  const auto t = narrow_to_f32(random_tensor({3, 64, 64}, rng));
  const auto f = decode_cplx(encode_cplx(t, R"({"a":1})"));
  CHECK(f.tensor == t);
  CHECK(f.meta == R"({"a":1})");

  const auto plain = decode_cplx(encode_cplx(t));
  CHECK(plain.tensor == t);
  CHECK(plain.meta.empty());

  const ComplexTensor empty(Shape{0, 4});
  const auto e = decode_cplx(encode_cplx(empty));
  CHECK(e.tensor.shape() == Shape{0, 4});
  CHECK(e.tensor.size() == 0);

  const auto path = temp_path("rt.cplx");
  write_cplx(path, t, "meta");
  const auto r = read_cplx(path);
  CHECK(r.tensor == t);
  CHECK(r.meta == "meta");
  std::filesystem::remove(path);
}

TEST_CASE("CPLX errors carry distinct codes") {
  Rng rng(2);
  const auto good = encode_cplx(random_tensor({2, 3}, rng), "xyz");
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      decode_cplx(b);
    } catch (const CplxError& e) {
      return e.code();
    }
    FAIL("no error raised");
    return CplxErrc::io;
  };
  auto bad = good;
  bad[0] = 'X';
  CHECK(code_of(bad) == CplxErrc::bad_magic);
  bad = good;
  bad[4] = 2;
  CHECK(code_of(bad) == CplxErrc::version);
  CHECK(code_of({good.begin(), good.begin() + 20}) == CplxErrc::truncated);
  CHECK(code_of({good.begin(), good.end() - 1}) == CplxErrc::truncated);
  bad = good;
  bad.push_back(0);
  CHECK(code_of(bad) == CplxErrc::bad_metadata);

  try {
    read_cplx(temp_path("does/not/exist.cplx"));
    FAIL("expected an io error");
  } catch (const CplxError& e) {
    CHECK(e.code() == CplxErrc::io);
  }
}

TEST_CASE("synthetic scene") {
  SceneConfig cfg;
  cfg.seed = 5;
  const auto a = gen_scene(cfg);
  const auto b = gen_scene(cfg);
  CHECK(a.image == b.image);
  CHECK(a.labels == b.labels);
  cfg.seed = 6;
  CHECK_FALSE(gen_scene(cfg).image == a.image);
  CHECK(a.image.shape() == Shape{3, 64, 64});
  std::set<std::size_t> seen(a.labels.begin(), a.labels.end());
  CHECK(seen.size() > 1);

  SUBCASE("noiseless sphere pixels decompose to pure k_s") {
    SceneConfig s;
    s.looks = std::numeric_limits<double>::infinity();
    s.classes = {Mechanism::sphere};
    s.height = s.width = 16;
    s.block = 8;
    const auto sc = gen_scene(s);
    CHECK(sc.image == sc.noiseless);
    const auto kr = krogager_map(sc.image);
    for (std::size_t i = 0; i < 256; ++i) {
      CHECK(kr[2 * 256 + i] == doctest::Approx(1.0));
      CHECK(kr[i] == doctest::Approx(0.0));
      CHECK(kr[256 + i] == doctest::Approx(0.0));
    }
  }
  SUBCASE("labels are recoverable from the noiseless field") {
    SceneConfig s;
    s.seed = 9;
    s.looks = std::numeric_limits<double>::infinity();
    const auto sc = gen_scene(s);
    const auto cls = cameron_map(sc.noiseless);
    for (std::size_t i = 0; i < cls.size(); ++i) {
      const auto m = s.classes[sc.labels[i]];
      if (m == Mechanism::helix) {
        CHECK((cls[i] == CameronClass::left_helix || cls[i] == CameronClass::right_helix));
      } else {
        CHECK(cls[i] == expected_cameron(m));
      }
    }
  }
  SUBCASE("entropy is low inside a region and rises at boundaries") {
    SceneConfig s;
    s.seed = 3;
    const auto sc = gen_scene(s);
    const auto ha = halpha_map(sc.image, 7);
    const std::size_t w = sc.width;
    double inside = 0, boundary = 0;
    std::size_t n_in = 0, n_b = 0;
    for (std::size_t i = 0; i < sc.height; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t bi = i % s.block, bj = j % s.block;
        const bool interior = bi >= 3 && bi < s.block - 3 && bj >= 3 && bj < s.block - 3;
        bool mixed = false;
        for (long di = -3; di <= 3 && !mixed; ++di) {
          for (long dj = -3; dj <= 3; ++dj) {
            const std::size_t ii = (i + sc.height + di) % sc.height, jj = (j + w + dj) % w;
            if (sc.labels[ii * w + jj] != sc.labels[i * w + j]) {
              mixed = true;
              break;
            }
          }
        }
        if (interior) {
          CHECK(ha.entropy[i * w + j] < 0.3);
          inside += ha.entropy[i * w + j];
          ++n_in;
        } else if (mixed) {
          boundary += ha.entropy[i * w + j];
          ++n_b;
        }
      }
    }
    REQUIRE(n_b > 0);
    CHECK(boundary / n_b > inside / n_in);
  }
  CHECK_THROWS(gen_scene(SceneConfig{0, 60, 64, 16}));
}

TEST_CASE("tiles") {
  const auto tiles = gen_tiles(1, 10, 8);
  REQUIRE(tiles.size() == 10);
  for (const auto& t : tiles) {
    CHECK(t.x.shape() == Shape{3, 8, 8});
    CHECK(t.mask.size() == 64);
    for (auto m : t.mask) CHECK(m == t.label);
  }
  const auto again = gen_tiles(1, 10, 8);
  for (std::size_t i = 0; i < 10; ++i) CHECK(again[i].x == tiles[i].x);
}

TEST_CASE("split") {
  const double r[] = {0.7, 0.15, 0.15};
  const auto s = split_indices(100, r, 3);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 15);
  CHECK(s.test.size() == 15);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 100);
  CHECK(*all.rbegin() == 99);
  const auto t = split_indices(100, r, 3);
  CHECK(t.train == s.train);
  CHECK(t.test == s.test);
  CHECK(split_indices(100, r, 4).train != s.train);

  std::vector<std::size_t> strata(140);
  for (std::size_t i = 0; i < strata.size(); ++i) strata[i] = i % 7;
  const auto st = split_indices(140, r, 1, strata);
  std::vector<std::size_t> per_class(7, 0);
  for (auto i : st.train) ++per_class[strata[i]];
  for (auto c : per_class) CHECK(c == 14);

  const double bad[] = {0.5, 0.5, 0.5};
  CHECK_THROWS(split_indices(10, bad, 0));
  CHECK_THROWS(split_indices(0, r, 0));
}

TEST_CASE("checkpoints") {
  ModelSpec spec;
  spec.channels = 4;
  spec.projection.kind = ProjectionKind::mlp;
  const auto model = Model::build(spec, 17);
  const auto path = temp_path("ckpt.cplx");
  save_checkpoint(path, model, {{"epochs", 3}});
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.spec().to_json() == model.spec().to_json());
  REQUIRE(loaded.params().size() == model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& a = model.params()[i];
    const auto& b = loaded.params()[i];
    CHECK(a.name == b.name);
    CHECK(a.shape == b.shape);
    for (std::size_t j = 0; j < a.value.size(); ++j) {
      CHECK(b.value[j] == static_cast<double>(static_cast<float>(a.value[j])));
    }
  }
  // The file itself is bit-stable.
  save_checkpoint(temp_path("ckpt2.cplx"), loaded, {{"epochs", 3}});
  std::ifstream f1(path, std::ios::binary), f2(temp_path("ckpt2.cplx"), std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  std::filesystem::remove(path);
  std::filesystem::remove(temp_path("ckpt2.cplx"));

  write_cplx(path, ComplexTensor(Shape{2}), "{}");
  CHECK_THROWS_AS(load_checkpoint(path), CplxError);
  std::filesystem::remove(path);
}
