#include "cvps/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <png.h>

namespace cvps {

// --- metrics -----------------------------------------------------------------

double overall_accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.size() != labels.size()) throw std::invalid_argument("overall_accuracy: length mismatch");
  if (preds.empty()) throw std::invalid_argument("overall_accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                std::size_t n_classes) {
  if (preds.size() != labels.size()) throw std::invalid_argument("macro_f1: length mismatch");
  if (preds.empty()) throw std::invalid_argument("macro_f1: empty input");
  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= n_classes || labels[i] >= n_classes) {
      throw std::out_of_range("macro_f1: class index out of range");
    }
    if (preds[i] == labels[i]) {
      ++tp[preds[i]];
    } else {
      ++fp[preds[i]];
      ++fn[labels[i]];
    }
  }
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
  }
  return 100.0 * sum / static_cast<double>(present);
}

// --- audits ------------------------------------------------------------------

std::vector<ShiftVec> shift_set(std::size_t spatial_axes, long lo, long hi) {
  if (spatial_axes == 0) throw std::invalid_argument("shift_set: no spatial axes");
  if (lo > hi) throw std::invalid_argument("shift_set: empty range");
  std::vector<ShiftVec> out;
  for (long s = lo; s <= hi; ++s) {
    if (spatial_axes == 1) {
      out.push_back({s});
      continue;
    }
    for (std::size_t a = 0; a < spatial_axes; ++a) {
      ShiftVec v(spatial_axes, 0);
      v[a] = s;
      out.push_back(v);
    }
    out.push_back(ShiftVec(spatial_axes, s));
  }
  return out;
}

nlohmann::json AuditReport::to_json() const {
  return {{"model", model_id}, {"task", task},          {"shifts", shifts},
          {"per_shift", per_shift}, {"crs", crs},       {"deviation", deviation},
          {"worst", worst},        {"pass", pass}};
}

std::string AuditReport::table() const {
  std::ostringstream os;
  const bool recon = task == "reconstruct";
  os << "audit " << (model_id.empty() ? "<model>" : model_id) << " (" << task << ")\n";
  os << "  shift            " << (recon ? "mean l2" : "agree %") << "\n";
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    std::ostringstream s;
    s << "(";
    for (std::size_t a = 0; a < shifts[i].size(); ++a) s << (a ? "," : "") << shifts[i][a];
    s << ")";
    os << "  " << std::left << std::setw(16) << s.str() << " ";
    if (recon) {
      os << std::scientific << std::setprecision(3) << per_shift[i] << std::defaultfloat;
    } else {
      os << std::fixed << std::setprecision(2) << per_shift[i] << std::defaultfloat;
    }
    os << "\n";
  }
  if (recon) {
    os << "  Cr.S mean l2 = " << std::scientific << deviation << ", worst = " << worst
       << std::defaultfloat;
  } else {
    os << "  Cr.S = " << std::fixed << std::setprecision(4) << crs << " %" << std::defaultfloat;
  }
  os << "  -> " << (pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

AuditReport crs_classify(const ClassifyFn& f, std::span<const ComplexTensor> inputs,
                         std::span<const ShiftVec> shifts) {
  AuditReport r;
  r.task = "classify";
  r.shifts.assign(shifts.begin(), shifts.end());
  std::vector<std::size_t> base(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) base[i] = f(inputs[i]);
  std::size_t agree = 0, total = 0;
  for (const auto& s : shifts) {
    std::size_t a = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) a += f(shift_spatial(inputs[i], s)) == base[i];
    r.per_shift.push_back(inputs.empty() ? 100.0 : 100.0 * static_cast<double>(a) / static_cast<double>(inputs.size()));
    agree += a;
    total += inputs.size();
  }
  r.crs = total == 0 ? 100.0 : 100.0 * static_cast<double>(agree) / static_cast<double>(total);
  r.pass = agree == total;
  return r;
}

AuditReport crs_segment(const SegmentFn& f, std::span<const ComplexTensor> inputs,
                        std::span<const ShiftVec> shifts) {
  AuditReport r;
  r.task = "segment";
  r.shifts.assign(shifts.begin(), shifts.end());
  std::vector<NdArray<std::size_t>> base;
  for (const auto& x : inputs) {
    const Shape spatial(x.shape().begin() + 1, x.shape().end());
    base.emplace_back(spatial, f(x));
  }
  std::size_t agree = 0, total = 0;
  for (const auto& s : shifts) {
    std::size_t a = 0, t = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto expect = shift_spatial(base[i], s);
      const auto got = f(shift_spatial(inputs[i], s));
      if (got.size() != expect.size()) throw std::invalid_argument("crs_segment: size mismatch");
      for (std::size_t j = 0; j < got.size(); ++j) a += got[j] == expect[j];
      t += got.size();
    }
    r.per_shift.push_back(t == 0 ? 100.0 : 100.0 * static_cast<double>(a) / static_cast<double>(t));
    agree += a;
    total += t;
  }
  r.crs = total == 0 ? 100.0 : 100.0 * static_cast<double>(agree) / static_cast<double>(total);
  r.pass = agree == total;
  return r;
}

AuditReport crs_reconstruct(const ReconstructFn& f, std::span<const ComplexTensor> inputs,
                            std::span<const ShiftVec> shifts) {
  AuditReport r;
  r.task = "reconstruct";
  r.shifts.assign(shifts.begin(), shifts.end());
  std::vector<ComplexTensor> base;
  for (const auto& x : inputs) base.push_back(f(x));
  double sum = 0;
  std::size_t count = 0;
  for (const auto& s : shifts) {
    double shift_sum = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto expect = shift_spatial(base[i], s);
      const auto got = f(shift_spatial(inputs[i], s));
      if (got.shape() != expect.shape()) throw std::invalid_argument("crs_reconstruct: shape mismatch");
      ComplexTensor d(got.shape());
      for (std::size_t j = 0; j < d.size(); ++j) d[j] = got[j] - expect[j];
      const double dev = norm_l2(d);
      r.worst = std::max(r.worst, dev);
      shift_sum += dev;
    }
    r.per_shift.push_back(inputs.empty() ? 0.0 : shift_sum / static_cast<double>(inputs.size()));
    sum += shift_sum;
    count += inputs.size();
  }
  r.deviation = count == 0 ? 0.0 : sum / static_cast<double>(count);
  r.crs = 100.0;
  r.pass = r.deviation <= 1e-9;
  return r;
}

AuditReport audit_model(const Model& model, std::span<const ComplexTensor> inputs,
                        std::span<const ShiftVec> shifts) {
  AuditReport r;
  switch (model.spec().task) {
    case Task::classify:
      r = crs_classify([&](const ComplexTensor& x) { return model.predict(x)[0]; }, inputs, shifts);
      break;
    case Task::segment:
      r = crs_segment([&](const ComplexTensor& x) { return model.predict(x); }, inputs, shifts);
      break;
    case Task::reconstruct:
      r = crs_reconstruct([&](const ComplexTensor& x) { return model.infer(x); }, inputs, shifts);
      break;
  }
  r.model_id = sampling_name(model.spec().sampling);
  if (model.spec().sampling == SamplingMode::lps) {
    r.model_id += "-" + ProjectionSpec::kind_name(model.spec().projection.kind);
  }
  if (model.spec().dual_real) r.model_id = "dual-" + r.model_id;
  return r;
}

// --- configuration -------------------------------------------------------------

RunConfig RunConfig::defaults(Task task) {
  RunConfig c;
  c.model.task = task;
  switch (task) {
    case Task::classify:
      c.optimizer = AdamWConfig::classification();
      c.gumbel = GumbelConfig::classification();
      break;
    case Task::segment:
      c.optimizer = AdamWConfig::segmentation();
      c.gumbel = GumbelConfig::classification();
      break;
    case Task::reconstruct:
      c.optimizer = AdamWConfig::reconstruction();
      c.gumbel = GumbelConfig::reconstruction();
      break;
  }
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
  return x;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (kv.count(key)) throw std::invalid_argument("config: duplicate key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  RunConfig c = defaults(kv.count("task") ? parse_task(kv["task"]) : Task::classify);
  for (const auto& [key, v] : kv) {
    if (key == "task") continue;
    else if (key == "sampling") c.model.sampling = parse_sampling(v);
    else if (key == "projection.kind") c.model.projection.kind = ProjectionSpec::parse_kind(v);
    else if (key == "projection.M") c.model.projection.order = parse_size(key, v);
    else if (key == "projection.mlp_widths") c.model.projection.mlp_widths = parse_list(key, v);
    else if (key == "depth") c.model.depth = parse_size(key, v);
    else if (key == "channels") c.model.channels = parse_size(key, v);
    else if (key == "n_classes") c.model.n_classes = parse_size(key, v);
    else if (key == "kernel") c.model.kernel = parse_size(key, v);
    else if (key == "dual_real") c.model.dual_real = parse_bool(key, v);
    else if (key == "lowpass_after_pu") c.model.lowpass_after_pu = parse_bool(key, v);
    else if (key == "pool") c.model.pool = parse_bool(key, v);
    else if (key == "head_pool") c.model.head_pool = v;
    else if (key == "seed") c.seed = parse_size(key, v);
    else if (key == "epochs") c.epochs = parse_size(key, v);
    else if (key == "batch") c.batch = parse_size(key, v);
    else if (key == "tiles") c.tiles = parse_size(key, v);
    else if (key == "tile") c.tile = parse_size(key, v);
    else if (key == "looks") c.looks = v == "inf" ? std::numeric_limits<double>::infinity() : parse_double(key, v);
    else if (key == "lr") c.optimizer.lr = parse_double(key, v);
    else if (key == "weight_decay") c.optimizer.weight_decay = parse_double(key, v);
    else if (key == "gumbel.initial") c.gumbel.initial = parse_double(key, v);
    else if (key == "gumbel.gamma") c.gumbel.gamma = parse_double(key, v);
    else if (key == "gumbel.min") c.gumbel.minimum = parse_double(key, v);
    else if (key == "gumbel.step") c.gumbel.step = parse_size(key, v);
    else if (key == "gumbel.seed") {
      c.gumbel.seed = parse_size(key, v);
      c.gumbel_seed_set = true;
    } else if (key == "out") c.out = v;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  c.model.validate();
  if (c.epochs == 0 || c.batch == 0 || c.tiles < 3) {
    throw std::invalid_argument("config: epochs, batch must be positive and tiles >= 3");
  }
  if (!(c.optimizer.lr > 0)) throw std::invalid_argument("config: lr must be positive");
  if (!(c.gumbel.minimum > 0) || c.gumbel.initial < c.gumbel.minimum) {
    throw std::invalid_argument("config: need gumbel.initial >= gumbel.min > 0");
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

nlohmann::json RunConfig::to_json() const {
  return {{"model", model.to_json()},
          {"seed", seed},
          {"epochs", epochs},
          {"batch", batch},
          {"tiles", tiles},
          {"tile", tile},
          {"looks", std::isfinite(looks) ? nlohmann::json(looks) : nlohmann::json("inf")},
          {"lr", optimizer.lr},
          {"weight_decay", optimizer.weight_decay},
          {"gumbel", {{"initial", gumbel.initial}, {"gamma", gumbel.gamma}, {"min", gumbel.minimum},
                      {"step", gumbel.step}}}};
}

// --- training ----------------------------------------------------------------

nlohmann::json EpochRecord::to_json(std::uint64_t seed) const {
  return {{"epoch", epoch},   {"loss", loss},     {"temperature", temperature},
          {"val_oa", val_oa}, {"val_f1", val_f1}, {"val_mse", val_mse},
          {"seed", seed}};
}

Dataset make_dataset(const RunConfig& cfg) {
  Rng root(cfg.seed);
  const std::uint64_t data_seed = root.next_u64();
  const std::uint64_t split_seed = root.next_u64();
  Dataset d;
  d.samples = gen_tiles(data_seed, cfg.tiles, cfg.tile, cfg.looks);
  std::vector<std::size_t> strata(d.samples.size());
  for (std::size_t i = 0; i < strata.size(); ++i) strata[i] = d.samples[i].label;
  const double ratios[3] = {0.7, 0.15, 0.15};
  d.split = split_indices(d.samples.size(), ratios, split_seed, strata);
  return d;
}

double train_step(Model& model, AdamW& opt, std::span<const Sample* const> batch,
                  double temperature, Rng& rng) {
  ParamStore& store = model.params();
  store.zero_grad();
  double total = 0;
  thread_local Tape tape;
  for (const Sample* s : batch) {
    tape.clear();
    Binding binding(tape, store);
    ForwardContext ctx(tape, binding);
    ctx.training = true;
    ctx.temperature = temperature;
    ctx.rng = &rng;
    const VarTensor out = model.forward(ctx, s->x);
    const Var loss = model.loss(ctx, out, *s);
    if (!std::isfinite(loss.value())) {
      throw std::runtime_error("training diverged: non-finite loss " + std::to_string(loss.value()) +
                               " at temperature " + std::to_string(temperature));
    }
    tape.backward(loss);
    binding.accumulate(tape, store);
    total += loss.value();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& p : store.all()) {
    for (auto& g : p.grad) g *= inv;
  }
  opt.step(store);
  return total * inv;
}

EvalMetrics evaluate(const Model& model, std::span<const Sample> samples,
                     std::span<const std::size_t> indices) {
  EvalMetrics m;
  if (indices.empty()) return m;
  const Task task = model.spec().task;
  if (task == Task::reconstruct) {
    double sum = 0;
    for (auto i : indices) {
      const auto y = model.infer(samples[i].x);
      double e = 0;
      for (std::size_t j = 0; j < y.size(); ++j) e += std::norm(y[j] - samples[i].x[j]);
      sum += e / static_cast<double>(y.size());
    }
    m.mse = sum / static_cast<double>(indices.size());
    return m;
  }
  std::vector<std::size_t> preds, labels;
  for (auto i : indices) {
    const auto p = model.predict(samples[i].x);
    preds.insert(preds.end(), p.begin(), p.end());
    if (task == Task::classify) {
      labels.push_back(samples[i].label);
    } else {
      labels.insert(labels.end(), samples[i].mask.begin(), samples[i].mask.end());
    }
  }
  m.oa = overall_accuracy(preds, labels);
  m.f1 = macro_f1(preds, labels, model.spec().n_classes);
  return m;
}

TrainResult train(const RunConfig& cfg, const EpochCallback& on_epoch) {
  Rng root(cfg.seed);
  root.next_u64();  // data
  root.next_u64();  // split
  const std::uint64_t model_seed = root.next_u64();
  Rng order_rng = root.split();
  Rng gumbel_rng = cfg.gumbel_seed_set ? Rng(cfg.gumbel.seed) : root.split();

  const Dataset data = make_dataset(cfg);
  TrainResult res{Model::build(cfg.model, model_seed), {}, {}, 0, 0, 0};
  AdamW opt(cfg.optimizer);
  std::vector<std::size_t> order = data.split.train;
  std::vector<const Sample*> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lambda = anneal(cfg.gumbel, epoch, cfg.epochs);
    order_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch) {
      batch.clear();
      for (std::size_t i = at; i < std::min(order.size(), at + cfg.batch); ++i) {
        batch.push_back(&data.samples[order[i]]);
      }
      loss_sum += train_step(res.model, opt, batch, lambda, gumbel_rng) * static_cast<double>(batch.size());
      steps += batch.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    rec.temperature = lambda;
    const auto val = evaluate(res.model, data.samples, data.split.val);
    rec.val_oa = val.oa;
    rec.val_f1 = val.f1;
    rec.val_mse = val.mse;
    res.log.push_back(rec);
    res.log_lines.push_back(rec.to_json(cfg.seed).dump());
    if (on_epoch) on_epoch(rec);
  }
  const auto test = evaluate(res.model, data.samples, data.split.test);
  res.test_oa = test.oa;
  res.test_f1 = test.f1;
  res.test_mse = test.mse;

  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    save_checkpoint(cfg.out / "model.cplx", res.model, {{"config", cfg.to_json()}});
    std::ofstream log(cfg.out / "metrics.jsonl", std::ios::trunc);
    for (const auto& l : res.log_lines) log << l << "\n";
    log << nlohmann::json{{"test_oa", res.test_oa}, {"test_f1", res.test_f1},
                          {"test_mse", res.test_mse}, {"seed", cfg.seed}}.dump()
        << "\n";
  }
  return res;
}

// --- utilities -----------------------------------------------------------------

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> rgb) {
  if (rgb.size() != width * height * 3) throw std::invalid_argument("write_png: pixel count mismatch");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("write_png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("write_png: libpng failure for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + r * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

GumbelCheck gumbel_check(std::span<const double> probs, std::size_t samples, std::uint64_t seed,
                         double tol) {
  if (probs.empty() || samples == 0) throw std::invalid_argument("gumbel_check: empty input");
  std::vector<double> logits;
  for (double p : probs) {
    if (!(p > 0.0)) throw std::invalid_argument("gumbel_check: probabilities must be positive");
    logits.push_back(std::log(p));
  }
  double total = 0;
  for (double p : probs) total += p;
  Rng rng(seed);
  std::vector<std::size_t> counts(probs.size(), 0);
  for (std::size_t i = 0; i < samples; ++i) ++counts[gumbel_softmax(logits, 1.0, rng).index];
  GumbelCheck c;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    c.freq.push_back(static_cast<double>(counts[k]) / static_cast<double>(samples));
    c.max_error = std::max(c.max_error, std::abs(c.freq.back() - probs[k] / total));
  }
  c.pass = c.max_error <= tol;
  return c;
}

GradcheckReport gradcheck_target(const std::string& target, std::uint64_t seed) {
  Rng rng(seed);
  if (target == "modrelu") {
    const double at[3] = {3.0, 4.0, -2.0};
    return gradcheck(
        [](Tape& t, std::span<const Var> v) {
          const CVar y = modrelu(t, CVar{v[0], v[1]}, v[2]);
          return t.add(abs2(y), y.re);
        },
        at);
  }
  if (target == "polydec") {
    const std::size_t order = 3, n = 4;
    const std::size_t nt = polydec_theta_count(order);
    std::vector<double> at;
    for (std::size_t i = 0; i < 2 * n + nt + 1; ++i) at.push_back(rng.normal());
    return gradcheck(
        [=](Tape& t, std::span<const Var> v) {
          const auto theta = v.subspan(2 * n, nt);
          const Var beta = v[2 * n + nt];
          std::vector<Var> out;
          for (std::size_t k = 0; k < n; ++k) {
            const Var y = polydec(t, CVar{v[2 * k], v[2 * k + 1]}, theta, beta, order);
            out.push_back(t.mul(y, y));
          }
          return t.linear(out);
        },
        at);
  }
  if (target == "mlp") {
    ParamStore store;
    ProjectionSpec spec;
    spec.kind = ProjectionKind::mlp;
    spec.mlp_widths = {4};
    const Projection proj = Projection::create(store, "proj", spec, 2, 2, rng);
    for (auto& p : store.all()) {
      for (auto& v : p.value) v = rng.normal() * 0.5;
    }
    std::vector<cplx> z(4);
    for (auto& c : z) c = {rng.normal(), rng.normal()};
    std::vector<double> weights(4);
    for (auto& w : weights) w = rng.normal();
    const auto at = flatten_values(store);
    return gradcheck(
        [=, &store](Tape& t, std::span<const Var> v) {
          Binding b(store, v);
          std::vector<CVar> logits;
          for (const auto& c : z) logits.push_back(cconstant(t, c));
          const auto s = proj.project(t, b, logits);
          return t.linear(s, weights);
        },
        at);
  }
  if (target == "net") {
    ModelSpec spec;
    spec.depth = 1;
    spec.channels = 2;
    spec.n_classes = 3;
    spec.sampling = SamplingMode::lps;
    spec.projection.kind = ProjectionKind::polydec;
    const Model model = Model::build(spec, seed);
    Sample s;
    s.x = ComplexTensor(Shape{3, 4, 4});
    for (auto& c : s.x.storage()) c = {rng.normal(), rng.normal()};
    s.label = 1;
    const auto at = flatten_values(model.params());
    return gradcheck(
        [&](Tape& t, std::span<const Var> v) {
          Binding b(model.params(), v);
          ForwardContext ctx(t, b);
          const auto out = model.forward(ctx, s.x);
          return model.loss(ctx, out, s);
        },
        at);
  }
  throw std::invalid_argument("unknown gradcheck target '" + target + "'");
}

}  // namespace cvps
