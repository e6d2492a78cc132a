#include "cvps/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "cvps/rng.hpp"

namespace cvps {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

double get_f32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<double>(std::bit_cast<float>(get_u32(b, at)));
}

}  // namespace

std::vector<std::uint8_t> encode_cplx(const ComplexTensor& t, const std::string& meta) {
  if (t.rank() > 255) throw std::invalid_argument("write_cplx: rank above 255");
  std::vector<std::uint8_t> out{'C', 'P', 'L', 'X', kCplxVersion,
                                static_cast<std::uint8_t>(t.rank())};
  for (auto d : t.shape()) {
    if (d > UINT32_MAX) throw std::invalid_argument("write_cplx: dimension exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + 8 * t.size() + 4 + meta.size());
  for (const auto& z : t.data()) {
    put_f32(out, z.real());
    put_f32(out, z.imag());
  }
  if (!meta.empty()) {
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
  }
  return out;
}

CplxFile decode_cplx(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || std::memcmp(b.data(), "CPLX", 4) != 0) {
    throw CplxError(CplxErrc::bad_magic, "CPLX: bad magic");
  }
  if (b.size() < 6) throw CplxError(CplxErrc::truncated, "CPLX: truncated header");
  if (b[4] != kCplxVersion) {
    throw CplxError(CplxErrc::version, "CPLX: unsupported version " + std::to_string(b[4]));
  }
  const std::size_t rank = b[5];
  std::size_t at = 6;
  if (b.size() < at + 4 * rank) throw CplxError(CplxErrc::truncated, "CPLX: truncated dims");
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_u32(b, at);
    at += 4;
  }
  const std::size_t n = shape_size(shape);
  if ((b.size() - at) / 8 < n) throw CplxError(CplxErrc::truncated, "CPLX: truncated payload");
  std::vector<cplx> data(n);
  for (auto& z : data) {
    z = {get_f32(b, at), get_f32(b, at + 4)};
    at += 8;
  }
  CplxFile f{ComplexTensor(std::move(shape), std::move(data)), {}};
  if (at == b.size()) return f;
  if (b.size() - at < 4) throw CplxError(CplxErrc::truncated, "CPLX: truncated metadata length");
  const std::size_t len = get_u32(b, at);
  at += 4;
  if (b.size() - at < len) throw CplxError(CplxErrc::truncated, "CPLX: truncated metadata");
  if (b.size() - at > len) throw CplxError(CplxErrc::bad_metadata, "CPLX: trailing bytes");
  f.meta.assign(reinterpret_cast<const char*>(b.data() + at), len);
  return f;
}

void write_cplx(const std::filesystem::path& path, const ComplexTensor& t, const std::string& meta) {
  const auto bytes = encode_cplx(t, meta);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CplxError(CplxErrc::io, "CPLX: cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CplxError(CplxErrc::io, "CPLX: write failed for " + path.string());
}

CplxFile read_cplx(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CplxError(CplxErrc::io, "CPLX: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                        std::istreambuf_iterator<char>());
  return decode_cplx(bytes);
}

ComplexTensor narrow_to_f32(const ComplexTensor& t) {
  return map(t, [](const cplx& z) {
    return cplx{static_cast<double>(static_cast<float>(z.real())),
                static_cast<double>(static_cast<float>(z.imag()))};
  });
}

// --- synthetic scene -------------------------------------------------------------

namespace {

/// Gamma(shape, 1) by Marsaglia-Tsang.
double gamma_variate(Rng& rng, double shape) {
  if (shape < 1.0) return gamma_variate(rng, shape + 1.0) * std::pow(rng.uniform(), 1.0 / shape);
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

SyntheticScene gen_scene(const SceneConfig& cfg) {
  if (cfg.block == 0 || cfg.height == 0 || cfg.width == 0 || cfg.height % cfg.block != 0 ||
      cfg.width % cfg.block != 0) {
    throw std::invalid_argument("gen_scene: height and width must be positive multiples of the block");
  }
  if (cfg.classes.empty()) throw std::invalid_argument("gen_scene: no classes");
  if (!(cfg.looks > 0.0)) throw std::invalid_argument("gen_scene: looks must be positive");
  Rng rng(cfg.seed);
  const std::size_t h = cfg.height, w = cfg.width, plane = h * w;
  const std::size_t bh = h / cfg.block, bw = w / cfg.block;
  std::vector<std::size_t> block_class(bh * bw);
  for (auto& c : block_class) c = rng.index(cfg.classes.size());

  SyntheticScene s;
  s.height = h;
  s.width = w;
  s.image = ComplexTensor(Shape{3, h, w});
  s.noiseless = ComplexTensor(Shape{3, h, w});
  s.labels.resize(plane);
  const bool speckle = std::isfinite(cfg.looks);
  const double sigma = speckle ? std::sqrt(cfg.noise / cfg.looks / 2.0) : 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t label = block_class[(i / cfg.block) * bw + j / cfg.block];
      const std::size_t o = i * w + j;
      s.labels[o] = label;
      const auto k = pauli_decompose(canonical_sinclair(cfg.classes[label])).k();
      const double phase = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const cplx unit = std::polar(1.0, phase);
      const double amp = speckle ? std::sqrt(gamma_variate(rng, cfg.looks) / cfg.looks) : 1.0;
      PauliVector pv{}, clean{};
      std::array<cplx, 3> noisy{};
      for (std::size_t c = 0; c < 3; ++c) {
        noisy[c] = k[c] * amp * unit;
        if (speckle) noisy[c] += cplx{sigma * rng.normal(), sigma * rng.normal()};
      }
      const double r2 = std::numbers::sqrt2;
      pv = {noisy[0] * r2, noisy[1] * r2, noisy[2] * r2};
      clean = {k[0] * unit * r2, k[1] * unit * r2, k[2] * unit * r2};
      const auto sp = pauli_recompose(pv);
      const auto sc = pauli_recompose(clean);
      s.image[o] = sp.hh;
      s.image[plane + o] = sp.hv;
      s.image[2 * plane + o] = sp.vv;
      s.noiseless[o] = sc.hh;
      s.noiseless[plane + o] = sc.hv;
      s.noiseless[2 * plane + o] = sc.vv;
    }
  }
  return s;
}

std::vector<Sample> tile_scene(const SyntheticScene& scene, std::size_t tile) {
  if (tile == 0 || scene.height % tile != 0 || scene.width % tile != 0) {
    throw std::invalid_argument("tile_scene: tile must divide the scene");
  }
  const std::size_t h = scene.height, w = scene.width, plane = h * w;
  std::vector<Sample> out;
  for (std::size_t ti = 0; ti < h / tile; ++ti) {
    for (std::size_t tj = 0; tj < w / tile; ++tj) {
      Sample s;
      s.x = ComplexTensor(Shape{3, tile, tile});
      s.mask.resize(tile * tile);
      std::map<std::size_t, std::size_t> counts;
      for (std::size_t i = 0; i < tile; ++i) {
        for (std::size_t j = 0; j < tile; ++j) {
          const std::size_t src = (ti * tile + i) * w + tj * tile + j;
          const std::size_t dst = i * tile + j;
          for (std::size_t c = 0; c < 3; ++c) s.x[c * tile * tile + dst] = scene.image[c * plane + src];
          s.mask[dst] = scene.labels[src];
          ++counts[scene.labels[src]];
        }
      }
      std::size_t best = 0;
      for (const auto& [cls, n] : counts) {
        if (n > best) {
          best = n;
          s.label = cls;
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sample> gen_tiles(std::uint64_t seed, std::size_t count, std::size_t tile, double looks) {
  if (count == 0) throw std::invalid_argument("gen_tiles: count must be positive");
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t rows = (count + cols - 1) / cols;
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.height = rows * tile;
  cfg.width = cols * tile;
  cfg.block = tile;
  cfg.looks = looks;
  auto tiles = tile_scene(gen_scene(cfg), tile);
  tiles.resize(count);
  return tiles;
}

Split split_indices(std::size_t n, std::span<const double> ratios, std::uint64_t seed,
                    std::span<const std::size_t> strata) {
  if (n == 0) throw std::invalid_argument("split: empty input");
  if (ratios.size() != 3) throw std::invalid_argument("split: need three ratios");
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw std::invalid_argument("split: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: ratios must sum to 1");
  if (!strata.empty() && strata.size() != n) throw std::invalid_argument("split: strata size");

  Rng rng(seed);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[strata.empty() ? 0 : strata[i]].push_back(i);
  Split s;
  for (auto& [cls, idx] : groups) {
    rng.shuffle(idx);
    const std::size_t m = idx.size();
    const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(m)));
    const auto n_val = std::min(m - n_train,
                                static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(m))));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.insert(s.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  return s;
}

// --- checkpoints -------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& extra) {
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<cplx> payload;
  for (const auto& p : model.params().all()) {
    manifest.push_back({{"name", p.name},
                        {"shape", p.shape},
                        {"role", p.role},
                        {"complex", p.is_complex},
                        {"offset", payload.size()}});
    if (p.is_complex) {
      for (std::size_t i = 0; i < p.count(); ++i) payload.emplace_back(p.value[2 * i], p.value[2 * i + 1]);
    } else {
      for (double v : p.value) payload.emplace_back(v, 0.0);
    }
  }
  nlohmann::json meta{{"kind", "checkpoint"}, {"spec", model.spec().to_json()}, {"params", manifest}};
  if (!extra.is_null()) meta["extra"] = extra;
  const std::size_t n = payload.size();
  write_cplx(path, ComplexTensor(Shape{n}, std::move(payload)), meta.dump());
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto f = read_cplx(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(f.meta);
  } catch (const nlohmann::json::exception& e) {
    throw CplxError(CplxErrc::bad_metadata, "checkpoint: unreadable manifest: " + std::string(e.what()));
  }
  if (meta.value("kind", "") != "checkpoint") {
    throw CplxError(CplxErrc::bad_metadata, "checkpoint: not a checkpoint file");
  }
  Model m = Model::build(ModelSpec::from_json(meta.at("spec")), 0);
  const auto& entries = meta.at("params");
  auto& params = m.params().all();
  if (entries.size() != params.size()) {
    throw CplxError(CplxErrc::bad_metadata, "checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != p.name || e.at("shape").get<Shape>() != p.shape ||
        e.at("complex").get<bool>() != p.is_complex) {
      throw CplxError(CplxErrc::bad_metadata, "checkpoint: manifest does not match " + p.name);
    }
    const std::size_t off = e.at("offset").get<std::size_t>();
    const std::size_t count = p.is_complex ? p.count() : p.value.size();
    if (off + count > f.tensor.size()) throw CplxError(CplxErrc::truncated, "checkpoint: payload too short");
    for (std::size_t j = 0; j < count; ++j) {
      const cplx z = f.tensor[off + j];
      if (p.is_complex) {
        p.value[2 * j] = z.real();
        p.value[2 * j + 1] = z.imag();
      } else {
        p.value[j] = z.real();
      }
    }
  }
  return m;
}

}  // namespace cvps
