#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cvps/harness.hpp"
#include "support.hpp"

using namespace cvps;
using cvps::testing::random_tensor;

namespace {

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  args.insert(args.begin(), "cvps");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

/// Brute-force macro F1 from an explicit confusion matrix.
double f1_oracle(const std::vector<std::size_t>& p, const std::vector<std::size_t>& l,
                 std::size_t k) {
  std::vector<std::vector<double>> cm(k, std::vector<double>(k, 0));
  for (std::size_t i = 0; i < p.size(); ++i) cm[l[i]][p[i]] += 1;
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = cm[c][c], row = 0, col = 0;
    for (std::size_t o = 0; o < k; ++o) {
      row += cm[c][o];
      col += cm[o][c];
    }
    if (row == 0 && col == 0) continue;
    ++present;
    sum += 2 * tp / (row + col);
  }
  return 100 * sum / present;
}

std::string small_config(std::uint64_t seed, std::size_t epochs = 2) {
  return "task = classify\nsampling = lps\nprojection.kind = polydec\ndepth = 1\nchannels = 4\n"
         "tiles = 30\ntile = 8\nbatch = 4\nepochs = " +
         std::to_string(epochs) + "\nseed = " + std::to_string(seed) + "\n";
}

}  // namespace

TEST_CASE("overall accuracy and macro F1") {
  const std::vector<std::size_t> p{1, 1, 0, 0}, l{1, 0, 0, 0};
  CHECK(overall_accuracy(p, l) == 75.0);
  CHECK(macro_f1(p, l, 2) == doctest::Approx(100 * (0.8 + 2.0 / 3) / 2));
  CHECK(macro_f1(p, l, 2) == doctest::Approx(73.33).epsilon(1e-4));
  CHECK(overall_accuracy(l, l) == 100.0);
  CHECK(macro_f1(l, l, 5) == 100.0);

  const std::vector<std::size_t> one(6, 2);
  CHECK(overall_accuracy(one, one) == 100.0);
  CHECK(macro_f1(one, one, 7) == 100.0);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(100), k = 2 + rng.index(6);
    std::vector<std::size_t> a(n), b(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.index(k);
      b[i] = rng.index(k);
      hits += a[i] == b[i];
    }
    CHECK(overall_accuracy(a, b) == 100.0 * hits / n);
    CHECK(macro_f1(a, b, k) == doctest::Approx(f1_oracle(a, b, k)).epsilon(1e-12));
  }
  CHECK_THROWS(overall_accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}));
  CHECK_THROWS(overall_accuracy(p, one));
}

TEST_CASE("shift set") {
  CHECK(shift_set(1).size() == 9);
  const auto s2 = shift_set(2);
  CHECK(s2.size() == 27);
  CHECK(s2[0] == ShiftVec{1, 0});
  CHECK(s2[1] == ShiftVec{0, 1});
  CHECK(s2[2] == ShiftVec{1, 1});
  CHECK(s2.back() == ShiftVec{9, 9});
  CHECK_THROWS(shift_set(2, 3, 1));
}

TEST_CASE("consistency audits on controls") {
  Rng rng(2);
  std::vector<ComplexTensor> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_tensor({2, 8, 8}, rng));
  const auto shifts = shift_set(2);

  const auto constant = crs_classify([](const ComplexTensor&) { return std::size_t{3}; }, xs, shifts);
  CHECK(constant.crs == 100.0);
  CHECK(constant.pass);

  const auto identity = crs_reconstruct([](const ComplexTensor& x) { return x; }, xs, shifts);
  CHECK(identity.deviation == 0.0);
  CHECK(identity.pass);

  const auto strided = crs_reconstruct(
      [](const ComplexTensor& x) {
        const std::size_t target[] = {8, 8};
        return ipoly(strided_baseline(x, 2, 2), PolyphaseIndex{{0, 0}, 2}, target);
      },
      xs, shifts);
  CHECK(strided.deviation > 1e-3);
  CHECK_FALSE(strided.pass);

  const auto argmax_pixel = crs_classify(
      [](const ComplexTensor& x) {
        const auto m = modulus(downsample(x, 2, 2));
        std::size_t best = 0;
        for (std::size_t i = 1; i < m.size(); ++i)
          if (m[i] > m[best]) best = i;
        return best % 7;
      },
      xs, shifts);
  CHECK(argmax_pixel.crs < 100.0);

  const auto seg = crs_segment(
      [](const ComplexTensor& x) {
        const auto m = modulus(x.slice0(0));
        std::vector<std::size_t> out(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > 1.0;
        return out;
      },
      xs, shifts);
  CHECK(seg.crs == 100.0);

  const auto report = constant.to_json();
  CHECK(report["crs"] == 100.0);
  CHECK(constant.table().find("Cr.S") != std::string::npos);
}

TEST_CASE("model audits") {
  const auto tiles = gen_tiles(4, 6, 8);
  std::vector<ComplexTensor> xs;
  for (const auto& t : tiles) xs.push_back(t.x);
  const auto shifts = shift_set(2, 1, 3);
  ModelSpec spec;
  spec.channels = 4;
  for (auto mode : {SamplingMode::aps, SamplingMode::lps}) {
    spec.sampling = mode;
    spec.task = Task::classify;
    CHECK(audit_model(Model::build(spec, 1), xs, shifts).crs == 100.0);
    spec.task = Task::segment;
    CHECK(audit_model(Model::build(spec, 1), xs, shifts).crs == 100.0);
    spec.task = Task::reconstruct;
    CHECK(audit_model(Model::build(spec, 1), xs, shifts).deviation <= 1e-9);
  }
  spec.sampling = SamplingMode::strided;
  spec.task = Task::reconstruct;
  CHECK(audit_model(Model::build(spec, 1), xs, shifts).deviation > 1e-3);
}

TEST_CASE("run config") {
  const auto c = RunConfig::parse(
      "# comment\ntask = reconstruct\nsampling = aps\nepochs = 7\nlooks = inf\n"
      "projection.mlp_widths = 4,3\nlr = 0.01  # trailing\n");
  CHECK(c.model.task == Task::reconstruct);
  CHECK(c.model.sampling == SamplingMode::aps);
  CHECK(c.epochs == 7);
  CHECK(std::isinf(c.looks));
  CHECK(c.model.projection.mlp_widths == std::vector<std::size_t>{4, 3});
  CHECK(c.optimizer.lr == 0.01);
  CHECK(c.optimizer.weight_decay == 0.0);
  CHECK(c.gumbel.initial == 1e-3);

  const auto d = RunConfig::parse("");
  CHECK(d.optimizer.lr == 1e-3);
  CHECK(d.optimizer.weight_decay == 1e-5);
  CHECK(RunConfig::parse("task = segment").optimizer.weight_decay == 5e-4);

  CHECK_THROWS(RunConfig::parse("epochs = 3\nepochs = 4"));
  CHECK_THROWS(RunConfig::parse("colour = blue"));
  CHECK_THROWS(RunConfig::parse("epochs three"));
  CHECK_THROWS(RunConfig::parse("epochs = -1"));
  CHECK_THROWS(RunConfig::parse("depth = 0"));
  CHECK_THROWS(RunConfig::parse("sampling = bilinear"));
  CHECK_THROWS(RunConfig::parse("head_pool = median"));
}

TEST_CASE("training") {
  SUBCASE("same seed gives identical logs and checkpoints") {
    auto a = RunConfig::parse(small_config(3));
    auto b = a;
    a.out = std::filesystem::temp_directory_path() / "cvps_train_a";
    b.out = std::filesystem::temp_directory_path() / "cvps_train_b";
    const auto ra = train(a);
    const auto rb = train(b);
    CHECK(ra.log_lines == rb.log_lines);
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream f(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(f)), {});
    };
    CHECK(slurp(a.out / "model.cplx") == slurp(b.out / "model.cplx"));
    CHECK(slurp(a.out / "metrics.jsonl") == slurp(b.out / "metrics.jsonl"));
    CHECK(ra.log_lines[0].find("\"seed\":3") != std::string::npos);
    const auto other = train(RunConfig::parse(small_config(4)));
    CHECK(other.log_lines != ra.log_lines);
    std::filesystem::remove_all(a.out);
    std::filesystem::remove_all(b.out);
  }
  SUBCASE("loss decreases over the first five epochs") {
    auto c = RunConfig::parse("epochs = 5\n");
    const auto r = train(c);
    REQUIRE(r.log.size() == 5);
    CHECK(r.log.back().loss < r.log.front().loss);
  }
  SUBCASE("non-finite loss aborts with a diagnostic") {
    auto model = Model::build(ModelSpec{}, 0);
    for (auto& p : model.params().all()) {
      if (p.name == "head.bias") p.value.assign(p.value.size(), std::numeric_limits<double>::quiet_NaN());
    }
    AdamW opt(AdamWConfig::classification());
    Sample s;
    Rng data(1);
    s.x = random_tensor({3, 8, 8}, data);
    const Sample* batch[] = {&s};
    Rng rng(0);
    CHECK_THROWS_WITH_AS(train_step(model, opt, batch, 1e-5, rng),
                         doctest::Contains("non-finite"), std::runtime_error);
  }
}

TEST_CASE("gradient check targets") {
  for (const char* t : {"modrelu", "polydec", "mlp", "net"}) {
    CAPTURE(t);
    const auto r = gradcheck_target(t, 0);
    CHECK(r.pass);
    CHECK(r.max_rel_error <= 1e-4);
  }
  CHECK_THROWS(gradcheck_target("everything", 0));
}

TEST_CASE("command line") {
  std::string out, err;
  CHECK(cli({}, &out, &err) == 2);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({"gumbel-check", "--probs", "0.2,0.3,0.5", "--bogus"}) == 2);
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(out.find("gen-data") != std::string::npos);

  CHECK(cli({"gumbel-check", "--probs", "0.2,0.3,0.5", "--samples", "100000"}, &out) == 0);
  CHECK(out.find("PASS") != std::string::npos);
  CHECK(cli({"gradcheck", "--target", "modrelu"}, &out) == 0);

  const auto dir = std::filesystem::temp_directory_path() / "cvps_cli";
  std::filesystem::remove_all(dir);
  CHECK(cli({"gen-data", "--seed", "1", "--out", dir.string(), "--looks", "inf", "--classes",
             "sphere", "--height", "32", "--width", "32"}) == 0);
  const auto scene = (dir / "scene.cplx").string();
  CHECK(std::filesystem::exists(scene));

  CHECK(cli({"decompose", "--input", scene, "--method", "pauli", "--out",
             (dir / "d").string()},
            &out) == 0);
  std::istringstream is(out.substr(out.find(':') + 1));
  double r = 0, g = 0, b = 0;
  is >> r >> g >> b;
  CHECK(b > 0.9 * 255);
  CHECK(b > 10 * (r + g + 1e-9));
  CHECK(std::filesystem::exists(dir / "d_pauli.png"));
  CHECK(cli({"decompose", "--input", scene, "--method", "halpha", "--window", "3"}, &out) == 0);
  CHECK(out.find("zone 9: 1024") != std::string::npos);
  CHECK(cli({"decompose", "--input", scene, "--method", "cameron"}, &out) == 0);
  CHECK(out.find("trihedral: 1024") != std::string::npos);
  CHECK(cli({"decompose", "--input", scene, "--method", "svd"}) == 2);
  CHECK(cli({"decompose", "--input", (dir / "missing.cplx").string(), "--method", "pauli"}) == 2);

  ModelSpec spec;
  spec.channels = 4;
  spec.sampling = SamplingMode::strided;
  spec.task = Task::reconstruct;
  save_checkpoint(dir / "strided.cplx", Model::build(spec, 0));
  spec.sampling = SamplingMode::aps;
  save_checkpoint(dir / "aps.cplx", Model::build(spec, 0));
  CHECK(cli({"audit", "--model", (dir / "strided.cplx").string(), "--task", "reconstruct",
             "--shifts", "1..9", "--tiles", "4"},
            &out) == 1);
  CHECK(out.find("FAIL") != std::string::npos);
  CHECK(cli({"audit", "--model", (dir / "aps.cplx").string(), "--task", "reconstruct",
             "--shifts", "1..9", "--tiles", "4"},
            &out) == 0);
  CHECK(cli({"audit", "--model", (dir / "aps.cplx").string(), "--task", "classify"}) == 2);
  CHECK(cli({"audit", "--model", (dir / "aps.cplx").string(), "--shifts", "x..y"}) == 2);

  std::ofstream(dir / "run.cfg") << small_config(1, 1);
  CHECK(cli({"train", "--config", (dir / "run.cfg").string(), "--out", (dir / "run").string()},
            &out) == 0);
  CHECK(std::filesystem::exists(dir / "run" / "model.cplx"));
  CHECK(std::filesystem::exists(dir / "run" / "metrics.jsonl"));
  std::filesystem::remove_all(dir);
}

#ifdef CVPS_CLI_PATH
TEST_CASE("installed binary reports usage errors with exit code 2") {
  const std::string cmd = std::string(CVPS_CLI_PATH) + " --no-such-flag > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
#endif
