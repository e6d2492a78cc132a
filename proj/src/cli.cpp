#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cvps/harness.hpp"
#include "cvps/polsar.hpp"

namespace cvps {

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::pair<long, long> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const long v = std::stol(s);
      return {v, v};
    }
    return {std::stol(s.substr(0, dots)), std::stol(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UsageError("bad shift range '" + s + "', expected A..B");
  }
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "'");
    }
  }
  return out;
}

double parse_looks(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw UsageError("bad looks value '" + s + "'");
  }
}

Mechanism parse_mechanism(const std::string& s) {
  for (std::size_t i = 0; i < kMechanismCount; ++i) {
    if (mechanism_name(static_cast<Mechanism>(i)) == s) return static_cast<Mechanism>(i);
  }
  throw UsageError("unknown mechanism '" + s + "'");
}

void print_gradcheck(std::ostream& out, const std::string& target, const GradcheckReport& r) {
  out << "gradcheck " << target << ": " << r.analytic.size() << " parameters, max relative error "
      << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat
      << " (worst index " << r.worst << ") -> " << (r.pass ? "PASS" : "FAIL") << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shift-equivariant complex-valued polyphase sampling toolkit", "cvps"};
  app.require_subcommand(1);

  auto* audit = app.add_subcommand("audit", "Circular-shift consistency audit of a checkpoint");
  std::string model_path, task, shifts = "1..9";
  std::size_t audit_tiles = 50, audit_tile = 16;
  std::uint64_t audit_seed = 1;
  std::string audit_looks = "4";
  audit->add_option("--model", model_path, "Checkpoint (.cplx)")->required();
  audit->add_option("--task", task, "Expected task: classify | segment | reconstruct");
  audit->add_option("--shifts", shifts, "Shift range A..B");
  audit->add_option("--tiles", audit_tiles, "Number of synthetic input tiles");
  audit->add_option("--tile", audit_tile, "Tile side");
  audit->add_option("--seed", audit_seed, "Seed of the synthetic inputs");
  audit->add_option("--looks", audit_looks, "Speckle looks of the inputs (or inf)");

  auto* train_cmd = app.add_subcommand("train", "Train a toy model from a key=value config");
  std::string config_path, train_out;
  train_cmd->add_option("--config", config_path, "Config file")->required();
  train_cmd->add_option("--out", train_out, "Output directory (overrides the config)");

  auto* decompose = app.add_subcommand("decompose", "Polarimetric decomposition of an HH/HV/VV image");
  std::string input_path, method, decompose_out;
  std::size_t window = 7;
  double percentile = 99.0;
  decompose->add_option("--input", input_path, "CPLX image [3, H, W]")->required();
  decompose->add_option("--method", method, "pauli | krogager | cameron | halpha")
      ->required()
      ->check(CLI::IsMember({"pauli", "krogager", "cameron", "halpha"}));
  decompose->add_option("--window", window, "Boxcar window for halpha (odd)");
  decompose->add_option("--out", decompose_out, "Output prefix for .png / .cplx files");
  decompose->add_option("--percentile", percentile, "RGB normalization percentile");

  auto* gcheck = app.add_subcommand("gumbel-check", "Empirical Gumbel-max selection frequencies");
  std::string probs_text;
  std::size_t samples = 100000;
  std::uint64_t gumbel_seed = 0;
  gcheck->add_option("--probs", probs_text, "Comma-separated probabilities")->required();
  gcheck->add_option("--samples", samples, "Number of draws");
  gcheck->add_option("--seed", gumbel_seed, "Seed");

  auto* grad = app.add_subcommand("gradcheck", "Reverse-mode vs central-difference gradients");
  std::string target;
  std::uint64_t grad_seed = 0;
  grad->add_option("--target", target, "polydec | mlp | modrelu | net")
      ->required()
      ->check(CLI::IsMember({"polydec", "mlp", "modrelu", "net"}));
  grad->add_option("--seed", grad_seed, "Seed");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic PolSAR-like scene");
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_looks = "4", gen_classes;
  std::size_t gen_h = 64, gen_w = 64, gen_block = 16;
  gen->add_option("--seed", gen_seed, "Seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--height", gen_h, "Scene height");
  gen->add_option("--width", gen_w, "Scene width");
  gen->add_option("--block", gen_block, "Class region side");
  gen->add_option("--looks", gen_looks, "Speckle looks (or inf)");
  gen->add_option("--classes", gen_classes, "Comma-separated mechanisms (default: all seven)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*audit) {
      Model model = load_checkpoint(model_path);
      if (!task.empty() && parse_task(task) != model.spec().task) {
        throw UsageError("checkpoint task is " + task_name(model.spec().task) + ", not " + task);
      }
      const auto [lo, hi] = parse_range(shifts);
      const auto set = shift_set(model.spec().spatial_axes, lo, hi);
      const auto tiles = gen_tiles(audit_seed, audit_tiles, audit_tile, parse_looks(audit_looks));
      std::vector<ComplexTensor> inputs;
      for (const auto& t : tiles) inputs.push_back(t.x);
      const auto report = audit_model(model, inputs, set);
      out << report.table() << report.to_json().dump() << "\n";
      return report.pass ? 0 : 1;
    }
    if (*train_cmd) {
      RunConfig cfg = RunConfig::from_file(config_path);
      if (!train_out.empty()) cfg.out = train_out;
      const auto res = train(cfg, [&](const EpochRecord& r) { out << r.to_json(cfg.seed).dump() << "\n"; });
      out << nlohmann::json{{"test_oa", res.test_oa}, {"test_f1", res.test_f1},
                            {"test_mse", res.test_mse}, {"seed", cfg.seed}}.dump()
          << "\n";
      return 0;
    }
    if (*decompose) {
      const auto file = read_cplx(input_path);
      const ComplexTensor& img = file.tensor;
      if (img.rank() != 3 || img.dim(0) != 3) {
        throw UsageError("decompose expects a [3, H, W] image, got " + shape_string(img.shape()));
      }
      const std::size_t h = img.dim(1), w = img.dim(2);
      if (method == "pauli" || method == "krogager") {
        const RealTensor planes = method == "pauli" ? pauli_rgb_planes(img) : krogager_map(img);
        const auto rgb = rgb_composite(planes, percentile);
        double mean[3] = {0, 0, 0};
        for (std::size_t i = 0; i < h * w; ++i) {
          for (std::size_t c = 0; c < 3; ++c) mean[c] += rgb[i * 3 + c];
        }
        for (double& m : mean) m /= static_cast<double>(h * w);
        out << method << " composite mean RGB: " << mean[0] << " " << mean[1] << " " << mean[2] << "\n";
        if (!decompose_out.empty()) {
          write_png(decompose_out + "_" + method + ".png", w, h, rgb);
          ComplexTensor raw(planes.shape());
          for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = planes[i];
          write_cplx(decompose_out + "_" + method + ".cplx", raw,
                     nlohmann::json{{"method", method}}.dump());
        }
      } else if (method == "cameron") {
        const auto cls = cameron_map(img);
        std::map<std::string, std::size_t> hist;
        ComplexTensor ids(Shape{h, w});
        for (std::size_t i = 0; i < cls.size(); ++i) {
          ++hist[cameron_name(cls[i])];
          ids[i] = static_cast<double>(static_cast<int>(cls[i]));
        }
        for (const auto& [name, n] : hist) out << "cameron " << name << ": " << n << "\n";
        if (!decompose_out.empty()) {
          write_cplx(decompose_out + "_cameron.cplx", ids, nlohmann::json{{"method", "cameron"}}.dump());
        }
      } else {
        const auto m = halpha_map(img, window);
        std::map<int, std::size_t> hist;
        ComplexTensor ha(Shape{h, w});
        for (std::size_t i = 0; i < m.zones.size(); ++i) {
          ++hist[m.zones[i]];
          ha[i] = {m.entropy[i], m.alpha_deg[i]};
        }
        for (const auto& [zone, n] : hist) out << "halpha zone " << zone << ": " << n << "\n";
        if (!decompose_out.empty()) {
          write_cplx(decompose_out + "_halpha.cplx", ha,
                     nlohmann::json{{"method", "halpha"}, {"window", window}, {"zones", m.zones}}.dump());
        }
      }
      return 0;
    }
    if (*gcheck) {
      const auto probs = parse_doubles(probs_text);
      const auto r = gumbel_check(probs, samples, gumbel_seed);
      out << "gumbel-check " << samples << " samples\n";
      for (std::size_t k = 0; k < probs.size(); ++k) {
        out << "  class " << k << ": target " << probs[k] << ", observed " << r.freq[k] << "\n";
      }
      out << "  max deviation " << r.max_error << " -> " << (r.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? 0 : 1;
    }
    if (*grad) {
      const auto r = gradcheck_target(target, grad_seed);
      print_gradcheck(out, target, r);
      return r.pass ? 0 : 1;
    }
    if (*gen) {
      SceneConfig cfg;
      cfg.seed = gen_seed;
      cfg.height = gen_h;
      cfg.width = gen_w;
      cfg.block = gen_block;
      cfg.looks = parse_looks(gen_looks);
      if (!gen_classes.empty()) {
        cfg.classes.clear();
        std::stringstream ss(gen_classes);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.classes.push_back(parse_mechanism(item));
      }
      const auto scene = gen_scene(cfg);
      std::filesystem::create_directories(gen_out);
      std::vector<std::string> names;
      for (auto m : cfg.classes) names.push_back(mechanism_name(m));
      const nlohmann::json meta{{"kind", "scene"},
                                {"seed", gen_seed},
                                {"looks", gen_looks},
                                {"classes", names},
                                {"labels", scene.labels}};
      const auto path = std::filesystem::path(gen_out) / "scene.cplx";
      write_cplx(path, scene.image, meta.dump());
      out << "wrote " << path.string() << " (" << shape_string(scene.image.shape()) << ")\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace cvps
