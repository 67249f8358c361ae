// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion; exit status 0 iff all selected pass.
//   acceptance [--only 1,2,...] [--out DIR] [--jobs K]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "augnet/checkpoint.hpp"
#include "augnet/cli.hpp"
#include "augnet/config.hpp"
#include "augnet/experiment.hpp"
#include "augnet/grad_check.hpp"
#include "augnet/grad_suites.hpp"
#include "augnet/ops.hpp"

using namespace augnet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// summary.json of a completed run in `dir` whose recorded config equals `c`.
std::optional<json> finished(const fs::path& dir, const ExperimentConfig& c) {
  std::ifstream in(dir / "summary.json");
  if (!in) return std::nullopt;
  try {
    json s = json::parse(in);
    if (s.contains("config") && s["config"] == to_json(c)) return s;
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

struct Runner {
  fs::path out;
  std::size_t jobs = 4;

  // Trains one configuration, logging epochs to <dir>/log.txt. A finished run of the
  // identical config in `dir` is reused.
  RunOutcome run(ExperimentConfig c, const fs::path& dir) const {
    c.output = dir.string();
    if (auto prior = finished(dir, c)) {
      RunOutcome o;
      o.summary = std::move(*prior);
      const std::string status = o.summary["status"];
      o.exit_code = status == "ok" ? kExitOk : status == "diverged" ? kExitDivergence : kExitDegenerate;
      std::cout << "  " << dir.filename().string() << ": reused finished run, test acc "
                << fmt(o.summary["test_acc"].get<double>()) << std::endl;
      return o;
    }
    fs::create_directories(dir);
    std::ofstream log(dir / "log.txt");
    const auto t0 = std::chrono::steady_clock::now();
    auto outcome = run_single(c, log);
    std::cout << "  " << dir.filename().string() << ": status " << outcome.summary["status"].get<std::string>()
              << ", test acc " << fmt(outcome.summary["test_acc"].get<double>()) << " (" << fmt(seconds_since(t0), 3)
              << " s)" << std::endl;
    return outcome;
  }
};

// Index of a transform kind inside a summary layer entry, or -1.
int find_transform(const json& layer, const std::string& name) {
  const auto& ts = layer["transforms"];
  for (std::size_t q = 0; q < ts.size(); ++q) {
    if (ts[q]["name"] == name) return static_cast<int>(q);
  }
  return -1;
}

Verdict criterion1(const Runner&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto items = run_grad_suites(GradScope::all);
  double ops = 0.0, aug = 0.0, models = 0.0;
  std::vector<std::string> failed;
  for (const auto& g : items) {
    double& worst = g.suite == "ops" ? ops : g.suite == "augmentations" ? aug : models;
    worst = std::max(worst, g.error);
    if (!g.passed()) failed.push_back(g.name);
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = failed.empty() && ops < 1e-5 && aug < 1e-4 && secs < 120.0;
  v.detail = std::to_string(items.size()) + " checks, worst op " + fmt(ops, 3) + ", worst augmentation " + fmt(aug, 3) +
             ", worst model " + fmt(models, 3) + ", " + fmt(secs, 3) + " s";
  for (const auto& f : failed) v.detail += ", failed " + f;
  return v;
}

Verdict criterion2(const Runner&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2002);
  double worst = 0.0;
  std::size_t trunks = 0;
  for (std::size_t t = 0; t < 10; ++t) {
    TrunkConfig tc;
    Shape batch;
    if (t < 7) {
      tc.kind = TrunkKind::mlp;
      tc.mlp_widths.assign(1 + t % 3, 4 + 3 * t);
      tc.input_shape = {3, 8, 8};
      batch = {24, 3, 8, 8};
    } else {
      tc.kind = TrunkKind::sprite_cnn;
      tc.input_shape = {3, 32, 32};
      batch = {12, 3, 32, 32};
    }
    ParameterStore store;
    Trunk trunk(tc, store, rng);
    const auto params = store.bind(nullptr);
    const auto f = [&](const Tensor& z) { return trunk.forward(params, z, Mode::eval); };
    std::vector<double> values(numel(batch));
    for (auto& x : values) x = rng.uniform(-1.0, 1.0);
    const Tensor x(batch, std::move(values));
    for (const auto& group : {flip_group(), rotation_group()}) {
      const OutputFn averaged = [&](const Tensor& in, Rng&) { return group_average_exact(f, group, in); };
      // A random group element per example.
      const InputTransform act = [&group](const Tensor& in, Rng& r) {
        std::vector<Tensor> rows;
        for (std::size_t i = 0; i < in.dim(0); ++i) rows.push_back(group[r.index(group.size())](slice_rows(in, i, i + 1)));
        return concat(rows);
      };
      const auto rep = invariance(averaged, x, act, rng);
      for (double s : rep.scores) worst = std::max(worst, std::abs(s - 1.0));
      worst = std::max(worst, std::abs(rep.median - 1.0));
    }
    ++trunks;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60.0,
          std::to_string(trunks) + " trunks x {flip, 4 rotations}: max |Inv - 1| = " + fmt(worst, 3) + ", " +
              fmt(secs, 3) + " s"};
}

Verdict criterion3(const Runner&) {
  const auto t0 = std::chrono::steady_clock::now();
  const double m0 = 0.3, m1 = 0.6, lambda = 1.0, step = 0.05;
  // Gradient flow (small explicit steps) on the softmax-parametrized simplex.
  std::vector<double> hidden{0.0, 0.0};
  double w2 = 0.5;
  std::size_t steps = 0;
  for (; steps < 200000 && w2 <= 0.99; ++steps) {
    Tape tape;
    const Tensor h = tape.watch(Tensor::vector(hidden));
    const Tensor w = effective_weights(h);
    const Tensor r2 = add(square(scale(pick(w, 0), m0)), square(scale(pick(w, 1), m1)));
    tape.backward(scale(r2, -lambda));
    const auto g = tape.grad(h);
    hidden[0] -= step * g[0];
    hidden[1] -= step * g[1];
    w2 = std::exp(hidden[1]) / (std::exp(hidden[0]) + std::exp(hidden[1]));
  }
  // Closed form against autodiff with the other weight eliminated.
  Rng rng(3003);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double w0 = rng.uniform(0.01, 0.99);
    const std::array<double, 2> mu{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const auto analytic = reg_grad_analytic({w0, 1.0 - w0}, mu);
    for (int k = 0; k < 2; ++k) {
      const double mi = mu[k], mj = mu[1 - k];
      const ScalarFn r2 = [mi, mj](Tape&, const Tensor& wi) {
        return add(square(scale(wi, mi)), square(scale(add_constant(negate(wi), 1.0), mj)));
      };
      const double auto_grad = autodiff_gradient(r2, Tensor::vector({k == 0 ? w0 : 1.0 - w0}))[0];
      worst = std::max(worst, std::abs(auto_grad - analytic[k]));
    }
  }
  const double secs = seconds_since(t0);
  return {w2 > 0.99 && worst < 1e-8 && secs < 60.0,
          "w2 = " + fmt(w2, 6) + " after " + std::to_string(steps) + " steps, analytic vs autodiff max error " +
              fmt(worst, 3) + " over 100 points, " + fmt(secs, 3) + " s"};
}

Verdict criterion4(const Runner& r) {
  std::size_t good = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExperimentConfig c = preset_config(Preset::sinusoids);
    c.seed = seed;
    const auto o = r.run(c, r.out / "c4" / ("seed_" + std::to_string(seed)));
    const json& layer = o.summary["layers"][0];
    const int fs = find_transform(layer, "frequency_shift");
    const double w = layer["transforms"][fs]["weight"], range = layer["transforms"][fs]["range"];
    const double acc = o.summary["test_acc"], secs = o.summary["seconds"];
    const bool selected = layer["selected"] == "frequency_shift" && w > 0.8;
    const bool in_band = range >= 0.35 && range <= 0.65;
    const bool ok = o.exit_code == kExitOk && selected && in_band && acc >= 0.90 && secs <= 15 * 60;
    good += ok;
    detail += "; seed " + std::to_string(seed) + ": selected " + layer["selected"].get<std::string>() + " (w " +
              fmt(layer["selected_weight"].get<double>(), 3) + "), shift w " + fmt(w, 3) + " range " + fmt(range, 3) +
              " Hz, test " + fmt(acc, 3) + (ok ? " ok" : " no");
  }
  return {good >= 4, std::to_string(good) + "/5 seeds meet all conditions" + detail};
}

Verdict criterion5(const Runner& r) {
  auto sprites = [](Preset p, std::uint64_t seed) {
    ExperimentConfig c = preset_config(p);
    c.dataset.n_train = 2000;
    c.dataset.n_test = 1000;
    c.train.epochs = 20;
    c.seed = seed;
    c.invariance.examples = 200;
    return c;
  };
  const double lo = std::numbers::pi / 4 * 0.7, hi = std::numbers::pi / 4 * 1.3;
  auto rotation = [](const json& summary) {
    const json& layer = summary["layers"][0];
    return layer["transforms"][find_transform(layer, "rotate")]["range"].get<double>();
  };
  bool timely = true;
  auto note_time = [&](const RunOutcome& o) { timely = timely && o.summary["seconds"].get<double>() <= 45 * 60; };

  const auto sel = r.run(sprites(Preset::sprites, 0), r.out / "c5" / "selective_seed_0");
  note_time(sel);
  const double sel_range = rotation(sel.summary);
  const std::string sel_argmax = sel.summary["layers"][0]["selected"];
  const bool sel_ok = sel.exit_code == kExitOk && sel_argmax == "rotate" && sel_range >= lo && sel_range <= hi;

  const auto none = r.run(sprites(Preset::sprites_noreg, 0), r.out / "c5" / "noreg_seed_0");
  note_time(none);
  const double none_range = rotation(none.summary);
  const bool none_ok = none.exit_code == kExitOk && none_range < std::numbers::pi / 16;

  std::size_t outside = 0;
  std::string aug_detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto a = r.run(sprites(Preset::sprites_augerino_reg, seed), r.out / "c5" / ("augerino_seed_" + std::to_string(seed)));
    note_time(a);
    const double range = rotation(a.summary);
    const bool out_of_band = range < lo || range > hi;
    outside += a.exit_code == kExitOk && out_of_band;
    aug_detail += " " + fmt(range, 3);
  }
  const bool aug_ok = outside >= 2;
  return {sel_ok && none_ok && aug_ok && timely,
          "selective: argmax " + sel_argmax + ", rotation " + fmt(sel_range, 3) + " rad (band [" + fmt(lo, 3) + ", " +
              fmt(hi, 3) + "]) " + (sel_ok ? "ok" : "no") + "; none: rotation " + fmt(none_range, 3) + " rad (< " +
              fmt(std::numbers::pi / 16, 3) + ") " + (none_ok ? "ok" : "no") + "; augerino rotations" + aug_detail +
              ": " + std::to_string(outside) + "/3 outside band " + (aug_ok ? "ok" : "no") +
              (timely ? "" : "; a run exceeded 45 min")};
}

Verdict criterion6(const Runner& r) {
  ExperimentConfig c = preset_config(Preset::capacity_sweep);
  c.output = (r.out / "c6").string();
  fs::create_directories(c.output);
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  std::vector<SweepRow> rows;
  double secs = 0.0;
  if (auto prior = finished(c.output, c)) {
    for (const auto& j : (*prior)["rows"]) {
      SweepRow row;
      row.width = j["width"];
      row.depth = j["depth"];
      row.method = j["method"];
      row.test_acc = j["test_acc"];
      row.invariance.median = j["inv_median"];
      row.diverged = j["diverged"];
      rows.push_back(row);
    }
    code = (*prior)["status"] == "ok" ? kExitOk : kExitDivergence;
    secs = (*prior)["seconds"];
    std::cout << "  reused finished sweep" << std::endl;
  } else {
    std::ofstream log(r.out / "c6" / "log.txt");
    rows = run_sweep(c, r.jobs, log, &code);
    secs = seconds_since(t0);
  }

  auto find = [&](std::size_t w, std::size_t d, const std::string& m) -> const SweepRow& {
    for (const auto& row : rows) {
      if (row.width == w && row.depth == d && row.method == m) return row;
    }
    throw std::runtime_error("missing sweep row");
  };
  bool inv_ok = true, acc_ok = true;
  std::string detail;
  for (auto d : c.sweep.depths) {
    for (auto w : c.sweep.widths) {
      const auto& a = find(w, d, "augnet");
      const auto& b = find(w, d, "baseline");
      const auto& o = find(w, d, "oracle");
      inv_ok = inv_ok && a.invariance.median >= 0.90;
      acc_ok = acc_ok && a.test_acc >= b.test_acc;
      detail += "; " + std::to_string(w) + "x" + std::to_string(d) + " inv a/b/o " + fmt(a.invariance.median, 3) + "/" +
                fmt(b.invariance.median, 3) + "/" + fmt(o.invariance.median, 3) + " acc " + fmt(a.test_acc, 3) + "/" +
                fmt(b.test_acc, 3) + "/" + fmt(o.test_acc, 3);
    }
  }
  const std::size_t w0 = *std::min_element(c.sweep.widths.begin(), c.sweep.widths.end());
  const std::size_t d0 = *std::min_element(c.sweep.depths.begin(), c.sweep.depths.end());
  const double gap = find(w0, d0, "augnet").invariance.median - find(w0, d0, "baseline").invariance.median;
  const bool gap_ok = gap >= 0.05;
  const bool ok = code == kExitOk && inv_ok && acc_ok && gap_ok && secs <= 3600;
  return {ok, std::string("AugNet Inv >= 0.9 everywhere: ") + (inv_ok ? "yes" : "no") +
                  ", smallest-point gap " + fmt(gap, 3) + (gap_ok ? " ok" : " no") +
                  ", AugNet acc >= baseline everywhere: " + (acc_ok ? "yes" : "no") + ", " + fmt(secs, 4) + " s with " +
                  std::to_string(r.jobs) + " jobs" + detail};
}

Verdict criterion7(const Runner& r) {
  bool all_ok = true;
  std::string detail;
  for (std::size_t layers : {2, 4}) {
    ExperimentConfig c = preset_config(Preset::sinusoids_multilayer);
    c.augment.layers = layers;
    const auto o = r.run(c, r.out / "c7" / ("layers_" + std::to_string(layers)));
    std::size_t active = 0;
    bool rest_ok = true;
    std::string ranges;
    std::vector<std::pair<double, double>> per_layer;  // learned shift range, effective range
    for (const auto& layer : o.summary["layers"]) {
      const auto& t = layer["transforms"][find_transform(layer, "frequency_shift")];
      per_layer.push_back({t["range"].get<double>(), t["weight"].get<double>() * t["range"].get<double>()});
    }
    for (const auto& [learned, effective] : per_layer) active += learned > 0.2;
    // The layer(s) above 0.2 Hz are "active"; every other layer must be effectively the identity.
    for (const auto& [learned, effective] : per_layer) {
      if (learned <= 0.2) rest_ok = rest_ok && effective < 0.1;
      ranges += " " + fmt(learned, 3) + "/" + fmt(effective, 3);
    }
    const bool ok = o.exit_code == kExitOk && active == 1 && rest_ok && o.summary["seconds"].get<double>() <= 20 * 60;
    all_ok = all_ok && ok;
    detail += std::to_string(layers) + " layers: shift range/effective (Hz)" + ranges + ", " + std::to_string(active) +
              " above 0.2 Hz " + (ok ? "ok" : "no") + "; ";
  }
  return {all_ok, detail};
}

Verdict criterion8(const Runner& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = r.out / "c4" / "seed_0";
  ExperimentConfig c = preset_config(Preset::sinusoids);
  bool reuse = fs::exists(dir / "model.ckpt") && fs::exists(dir / "config.json");
  if (reuse) {
    std::ifstream in(dir / "config.json");
    ExperimentConfig saved = from_json(json::parse(in));
    saved.output = c.output;
    reuse = to_json(saved) == to_json(c);
  }
  if (!reuse) r.run(c, dir);
  ExperimentConfig rc = c;
  rc.invariance.copies = {1, 4, 10};
  AugNetModel model = make_model(rc, rc.augment.mu_init, rc.augment.layers);
  restore(model, load_checkpoint(dir / "model.ckpt"));
  const auto reports = copies_sweep(model, rc, make_data(rc).test, rc.invariance.copies);
  bool inv_ok = true, acc_ok = true;
  std::string detail;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i > 0) {
      inv_ok = inv_ok && reports[i].invariance.median >= reports[i - 1].invariance.median;
      acc_ok = acc_ok && reports[i].test_acc >= reports[i - 1].test_acc;
    }
    detail += " C=" + std::to_string(reports[i].copies) + ": Inv " + fmt(reports[i].invariance.median, 4) + " acc " +
              fmt(reports[i].test_acc, 4) + ";";
  }
  const double secs = seconds_since(t0);
  return {inv_ok && acc_ok, std::string("Inv non-decreasing: ") + (inv_ok ? "yes" : "no") +
                                ", accuracy non-decreasing: " + (acc_ok ? "yes" : "no") + ";" + detail + " " +
                                fmt(secs, 3) + " s" + (reuse ? " (criterion 4 seed-0 model)" : "")};
}

Verdict criterion9(const Runner&) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(9009);
  TrunkConfig tc;
  tc.kind = TrunkKind::mlp;
  tc.mlp_widths = {16, 8};
  tc.input_shape = {1, 64};
  AugNetModel model(tc, rng);
  auto fs = TransformSpec::defaults(TransformKind::frequency_shift);
  fs.sample_rate = 32.0;
  model.add_layer({fs, TransformSpec::defaults(TransformKind::ft_surrogate), TransformSpec::defaults(TransformKind::gaussian_noise)}, 0.5);
  model.add_layer({TransformSpec::defaults(TransformKind::brightness), TransformSpec::defaults(TransformKind::contrast)}, 0.5);
  for (auto& p : model.params()) {
    if (p.group == ParamGroup::trunk) continue;
    for (auto& v : p.value) v = p.group == ParamGroup::aug_magnitudes ? rng.uniform(0.3, 0.9) : rng.uniform(-1.0, 1.0);
  }
  constexpr std::size_t examples = 3, classes = 4, chunk = 2000;
  std::vector<double> xs(examples * 64);
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  const Tensor x({examples, 1, 64}, std::move(xs));
  const auto params = model.params().bind(nullptr);

  // Per-coordinate mean and variance of single-copy outputs over `draws` draws.
  auto moments = [&](std::size_t draws, Rng r) {
    std::vector<double> s(examples * classes, 0.0), s2(examples * classes, 0.0);
    for (std::size_t done = 0; done < draws; done += chunk) {
      const Tensor y = augnet_forward(tile_rows(x, chunk), model, 1, params, r, Mode::eval);
      const auto d = y.data();
      for (std::size_t t = 0; t < chunk; ++t) {
        for (std::size_t k = 0; k < examples * classes; ++k) {
          const double v = d[t * examples * classes + k];
          s[k] += v;
          s2[k] += v * v;
        }
      }
    }
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(draws);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double mean = s[k] / n;
      out.emplace_back(mean, (s2[k] - n * mean * mean) / (n - 1.0));
    }
    return out;
  };
  const auto estimate = moments(10000, Rng(1));
  const auto reference = moments(100000, Rng(2));
  double worst = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    const double se = std::sqrt(estimate[k].second / 1e4 + reference[k].second / 1e5);
    worst = std::max(worst, std::abs(estimate[k].first - reference[k].first) / se);
  }
  const double secs = seconds_since(t0);
  return {worst <= 3.0 && secs < 300.0, std::to_string(examples * classes) + " output coordinates, max |difference| = " +
                                            fmt(worst, 3) + " standard errors, " + fmt(secs, 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> only;
  Runner runner;
  runner.out = "acceptance_runs";
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--out", runner.out, "Directory for experiment runs");
  app.add_option("--jobs", runner.jobs, "Worker slots for the capacity sweep")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  cli::tune_allocator();

  using Check = Verdict (*)(const Runner&);
  const Check checks[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                          criterion6, criterion7, criterion8, criterion9};
  fs::create_directories(runner.out);
  bool all = true;
  json results = json::object();
  for (int k : only) {
    Verdict v;
    try {
      v = checks[k - 1](runner);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << " | " << v.detail << std::endl;
    results[std::to_string(k)] = {{"pass", v.pass}, {"detail", v.detail}};
    std::ofstream(runner.out / ("criterion_" + std::to_string(k) + ".json")) << results[std::to_string(k)].dump(2);
  }
  return all ? 0 : 1;
}
