#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvps/dataio.hpp"
#include "cvps/model.hpp"
#include "cvps/select.hpp"

namespace cvps {

// ---------------------------------------------------------------------------
// Metrics.

/// Percentage of positions where preds == labels.
double overall_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);

/// Unweighted mean of per-class F1 (percent); classes absent from both inputs are skipped.
double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                std::size_t n_classes);

// ---------------------------------------------------------------------------
// Shift-consistency audits.

using ShiftVec = std::vector<long>;

/// Amounts lo..hi per axis. One axis: {s}; two or more: (s,0,..), (0,s,..), ..., (s,s,..).
std::vector<ShiftVec> shift_set(std::size_t spatial_axes, long lo = 1, long hi = 9);

struct AuditReport {
  std::string model_id;
  std::string task;
  std::vector<ShiftVec> shifts;
  std::vector<double> per_shift;  ///< agreement (%) or mean l2 deviation per shift
  double crs = 100.0;             ///< percent agreement (classify / segment)
  double deviation = 0.0;         ///< mean l2 deviation (reconstruct)
  double worst = 0.0;             ///< largest single l2 deviation (reconstruct)
  bool pass = false;

  nlohmann::json to_json() const;
  std::string table() const;
};

using ClassifyFn = std::function<std::size_t(const ComplexTensor&)>;
using SegmentFn = std::function<std::vector<std::size_t>(const ComplexTensor&)>;
using ReconstructFn = std::function<ComplexTensor(const ComplexTensor&)>;

/// Agreement between the prediction on x and on shift(x).
AuditReport crs_classify(const ClassifyFn& f, std::span<const ComplexTensor> inputs,
                         std::span<const ShiftVec> shifts);
/// Per-pixel agreement between shift(f(x)) and f(shift(x)).
AuditReport crs_segment(const SegmentFn& f, std::span<const ComplexTensor> inputs,
                        std::span<const ShiftVec> shifts);
/// Mean ||f(shift(x)) - shift(f(x))||_2.
AuditReport crs_reconstruct(const ReconstructFn& f, std::span<const ComplexTensor> inputs,
                            std::span<const ShiftVec> shifts);

/// Dispatches on the model's task.
AuditReport audit_model(const Model& model, std::span<const ComplexTensor> inputs,
                        std::span<const ShiftVec> shifts);

// ---------------------------------------------------------------------------
// Run configuration and training.

struct RunConfig {
  ModelSpec model;
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t batch = 8;
  std::size_t tiles = 200;
  std::size_t tile = 16;
  double looks = 4.0;
  AdamWConfig optimizer = AdamWConfig::classification();
  GumbelConfig gumbel = GumbelConfig::classification();
  bool gumbel_seed_set = false;
  std::filesystem::path out;  ///< checkpoint and log directory; empty to skip writing

  /// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
  static RunConfig parse(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);
  /// Task defaults for the optimizer and temperature schedule.
  static RunConfig defaults(Task task);
  nlohmann::json to_json() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double temperature = 0;
  double val_oa = 0, val_f1 = 0, val_mse = 0;
  nlohmann::json to_json(std::uint64_t seed) const;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> log;
  std::vector<std::string> log_lines;  ///< one JSON record per epoch
  double test_oa = 0, test_f1 = 0, test_mse = 0;
};

/// Training data for a config: tiles from the synthetic scene and a 70/15/15 split.
struct Dataset {
  std::vector<Sample> samples;
  Split split;
};
Dataset make_dataset(const RunConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const RunConfig& cfg, const EpochCallback& on_epoch = {});

/// One optimizer step over `batch`; returns the mean loss.
double train_step(Model& model, AdamW& opt, std::span<const Sample* const> batch,
                  double temperature, Rng& rng);

struct EvalMetrics {
  double oa = 0, f1 = 0, mse = 0;
};
EvalMetrics evaluate(const Model& model, std::span<const Sample> samples,
                     std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Utilities used by the command line.

/// Writes 8-bit RGB pixels (row-major, interleaved) as PNG.
void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb);

struct GumbelCheck {
  std::vector<double> freq;
  double max_error = 0;
  bool pass = false;
};
GumbelCheck gumbel_check(std::span<const double> probs, std::size_t samples, std::uint64_t seed,
                         double tol = 0.01);

/// Gradient check of a named target: polydec, mlp, modrelu or net.
GradcheckReport gradcheck_target(const std::string& target, std::uint64_t seed);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cvps
