#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvps/ctensor.hpp"
#include "cvps/model.hpp"
#include "cvps/polsar.hpp"

namespace cvps {

// ---------------------------------------------------------------------------
// CPLX container.
//
//   offset  size        field
//   0       4           magic "CPLX"
//   4       1           version (1)
//   5       1           rank r
//   6       4 r         dims, u32 little-endian
//   6+4r    8 prod(d)   payload, f32 little-endian (re, im) pairs, row-major
//   ...     4 + n       optional metadata: u32 little-endian length n, then n bytes UTF-8 JSON

enum class CplxErrc { bad_magic = 1, truncated = 2, version = 3, io = 4, bad_metadata = 5 };

class CplxError : public std::runtime_error {
 public:
  CplxError(CplxErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CplxErrc code() const { return code_; }

 private:
  CplxErrc code_;
};

struct CplxFile {
  ComplexTensor tensor;
  std::string meta;  ///< empty when the file has no metadata block
};

constexpr std::uint8_t kCplxVersion = 1;

std::vector<std::uint8_t> encode_cplx(const ComplexTensor& t, const std::string& meta = {});
CplxFile decode_cplx(std::span<const std::uint8_t> bytes);

void write_cplx(const std::filesystem::path& path, const ComplexTensor& t,
                const std::string& meta = {});
CplxFile read_cplx(const std::filesystem::path& path);

/// Rounds every component to f32 and back, i.e. what a write/read round trip yields.
ComplexTensor narrow_to_f32(const ComplexTensor& t);

// ---------------------------------------------------------------------------
// Synthetic PolSAR-like scene.

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t block = 16;  ///< side of each constant-class square region
  double looks = 4.0;      ///< speckle looks; infinity disables speckle and noise
  double noise = 0.05;     ///< additive noise power per Pauli component, divided by looks
  std::vector<Mechanism> classes{Mechanism::sphere,       Mechanism::dihedral,
                                 Mechanism::dipole,       Mechanism::cylinder,
                                 Mechanism::narrow_dihedral, Mechanism::quarter_wave,
                                 Mechanism::helix};
};

struct SyntheticScene {
  ComplexTensor image;              ///< [3, H, W]: HH, HV, VV
  ComplexTensor noiseless;          ///< canonical matrix times the pixel's phase
  std::vector<std::size_t> labels;  ///< index into SceneConfig::classes, row-major
  std::size_t height = 0, width = 0;
};

SyntheticScene gen_scene(const SceneConfig& cfg);

/// Non-overlapping tiles with majority-class labels and per-pixel masks.
std::vector<Sample> tile_scene(const SyntheticScene& scene, std::size_t tile);

/// Scene of at least `count` tiles of side `tile` (one class per tile), tiled.
std::vector<Sample> gen_tiles(std::uint64_t seed, std::size_t count, std::size_t tile,
                              double looks = 4.0);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/**
 * Random disjoint split of n items. With `strata` (one label per item) each class
 * is split separately with the same ratios.
 */
Split split_indices(std::size_t n, std::span<const double> ratios, std::uint64_t seed,
                    std::span<const std::size_t> strata = {});

// ---------------------------------------------------------------------------
// Checkpoints: rank-1 CPLX payload of all parameters plus a JSON manifest.

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& extra = {});
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cvps
