#include "augnet/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "augnet/checkpoint.hpp"
#include "augnet/error.hpp"
#include "augnet/ops.hpp"
#include "augnet/report.hpp"

namespace augnet {

using nlohmann::json;

namespace {

struct Stalled {};

std::vector<std::size_t> transforms_per_layer(const AugNetModel& m) {
  std::vector<std::size_t> n;
  for (const auto& l : m.layers()) n.push_back(l.transforms.size());
  return n;
}

json layers_json(const AugNetModel& model, const EpochRecord& rec) {
  json layers = json::array();
  for (std::size_t l = 0; l < rec.weights.size(); ++l) {
    const auto& w = rec.weights[l];
    const std::size_t best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    json transforms = json::array();
    for (std::size_t q = 0; q < w.size(); ++q) {
      transforms.push_back({{"name", std::string(to_string(model.layers()[l].transforms[q].kind))},
                            {"weight", w[q]},
                            {"mu", rec.magnitudes[l][q]},
                            {"range", rec.ranges[l][q]}});
    }
    layers.push_back({{"selected", transforms[best]["name"]},
                      {"selected_weight", w[best]},
                      {"selected_range", rec.ranges[l][best]},
                      {"transforms", transforms}});
  }
  return layers;
}

json report_json(const std::vector<CopiesReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    out.push_back({{"copies", r.copies},
                   {"median", r.invariance.median},
                   {"lower", r.invariance.lower},
                   {"upper", r.invariance.upper},
                   {"baseline", r.invariance.baseline},
                   {"test_acc", r.test_acc}});
  }
  return out;
}

std::string epoch_line(const AugNetModel& model, const EpochRecord& r, std::size_t epochs) {
  std::ostringstream s;
  s.precision(4);
  s << "epoch " << r.epoch << "/" << epochs << " loss " << r.train_loss << " train " << r.train_acc << " val "
    << r.val_acc << " test " << r.test_acc;
  for (std::size_t l = 0; l < r.weights.size(); ++l) {
    const auto& w = r.weights[l];
    const auto q = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    s << " | L" << l << " " << to_string(model.layers()[l].transforms[q].kind) << " w " << w[q] << " range "
      << r.ranges[l][q];
  }
  s << " (" << r.seconds << " s)";
  return s.str();
}

TrainConfig train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.epochs = c.train.epochs;
  t.batch_size = c.train.batch_size;
  t.adam.lr = c.train.lr;
  t.adam.weight_decay = c.train.weight_decay;
  t.lambda = c.train.lambda;
  t.reg = c.train.reg;
  t.patience = c.train.patience;
  t.seed = c.seed;
  return t;
}

void write_plots(const std::filesystem::path& dir, const AugNetModel& model, const std::vector<EpochRecord>& h) {
  std::vector<double> ep;
  for (const auto& r : h) ep.push_back(static_cast<double>(r.epoch));
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : h) v.push_back(get(r));
    return v;
  };
  Panel acc{"Accuracy", "epoch", "accuracy", {}};
  acc.series.push_back({"train", ep, column([](const EpochRecord& r) { return r.train_acc; })});
  acc.series.push_back({"validation", ep, column([](const EpochRecord& r) { return r.val_acc; })});
  acc.series.push_back({"test", ep, column([](const EpochRecord& r) { return r.test_acc; })});
  Panel loss{"Training loss", "epoch", "loss", {{"train", ep, column([](const EpochRecord& r) { return r.train_loss; })}}};
  write_file_atomic(dir / "accuracy.svg", svg_line_charts({acc, loss}));

  std::vector<Panel> panels;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    Panel w{"Layer " + std::to_string(l) + " weights", "epoch", "w", {}};
    Panel r{"Layer " + std::to_string(l) + " learned range", "epoch", "mu x range", {}};
    for (std::size_t q = 0; q < model.layers()[l].transforms.size(); ++q) {
      const std::string name(to_string(model.layers()[l].transforms[q].kind));
      w.series.push_back({name, ep, column([&](const EpochRecord& e) { return e.weights[l][q]; })});
      r.series.push_back({name, ep, column([&](const EpochRecord& e) { return e.ranges[l][q]; })});
    }
    panels.push_back(std::move(w));
    panels.push_back(std::move(r));
  }
  write_file_atomic(dir / "learned_params.svg", svg_line_charts(panels));
}

}  // namespace

DatasetSplits make_data(const ExperimentConfig& c) {
  DatasetSpec spec = c.dataset;
  spec.seed = c.seed;
  return generate(spec);
}

AugNetModel make_model(const ExperimentConfig& c, double mu_init, std::size_t layers) {
  Rng init = Rng(c.seed).split(7);
  AugNetModel m(c.trunk_config(), init);
  for (std::size_t l = 0; l < layers; ++l) m.add_layer(c.layer_transforms(), mu_init);
  m.copies_train = c.augment.copies_train;
  m.copies_eval = c.augment.copies_eval;
  return m;
}

InputTransform make_probe(const ExperimentConfig& c) {
  if (c.invariance.transform == "identity") return [](const Tensor& x, Rng&) { return x; };
  auto spec = TransformSpec::defaults(transform_kind_from_string(c.invariance.transform));
  if (c.invariance.range > 0.0) spec.range = c.invariance.range;
  spec.sample_rate = c.dataset.sample_rate;
  spec.validate();
  return [spec](const Tensor& x, Rng& rng) {
    return apply_transform(spec, x, Tensor::scalar(1.0), sample_draw(spec, x.shape(), rng));
  };
}

std::vector<CopiesReport> copies_sweep(AugNetModel& model, const ExperimentConfig& c, const Dataset& test,
                                       std::span<const std::size_t> copies) {
  const std::size_t n = c.invariance.examples == 0 ? test.size() : std::min(c.invariance.examples, test.size());
  const Tensor x = slice_rows(test.x, 0, n);
  const auto probe = make_probe(c);
  const Rng base = Rng(c.seed).split(4242);
  std::vector<CopiesReport> out;
  for (std::size_t k : copies) {
    CopiesReport r;
    r.copies = k;
    Rng inv_rng = base.split(k);
    const OutputFn f = [&model, k](const Tensor& in, Rng& rng) { return predict(model, in, k, rng); };
    r.invariance = invariance(f, x, probe, inv_rng);
    Rng acc_rng = base.split(100000 + k);
    r.test_acc = evaluate_accuracy(model, test, k, acc_rng);
    out.push_back(std::move(r));
  }
  return out;
}

RunOutcome run_single(const ExperimentConfig& c, std::ostream& log) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir = c.output;
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.json", to_json(c).dump(2) + "\n");
  const DatasetSplits data = make_data(c);

  RunOutcome out;
  out.mu_init = c.augment.mu_init;
  AugNetModel model = make_model(c, out.mu_init, c.augment.layers);
  TrainConfig tc = train_config(c);
  const bool watch_stall = c.augment.stall_fallback && c.augment.layers > 0 && out.mu_init == 0.0;
  tc.on_epoch = [&](const EpochRecord& r) {
    log << epoch_line(model, r, c.train.epochs) << std::endl;
    if (watch_stall && r.epoch == 1) {
      bool all_zero = true;
      for (const auto& layer : r.magnitudes) {
        for (double mu : layer) all_zero = all_zero && mu == 0.0;
      }
      if (all_zero) throw Stalled{};
    }
  };
  try {
    out.train = train(model, data, tc);
  } catch (const Stalled&) {
    out.used_fallback = true;
    out.mu_init = c.augment.fallback_mu_init;
    log << "magnitudes stalled at 0 after one epoch; restarting with mu_init " << out.mu_init << std::endl;
    model = make_model(c, out.mu_init, c.augment.layers);
    tc.on_epoch = [&](const EpochRecord& r) { log << epoch_line(model, r, c.train.epochs) << std::endl; };
    out.train = train(model, data, tc);
  }
  const auto& res = out.train;

  write_file_atomic(dir / "epochs.csv", epochs_csv(res.history, transforms_per_layer(model)));
  write_plots(dir, model, res.history);
  save_checkpoint(dir / "model.ckpt", res.best);

  EpochRecord last;
  if (!res.history.empty()) {
    last = res.history.back();
  } else {
    fill_aug_state(model, last);
  }

  json s;
  s["preset"] = std::string(to_string(c.preset));
  s["seed"] = c.seed;
  s["epochs_run"] = res.history.size();
  s["best_epoch"] = res.best_epoch;
  s["best_val_acc"] = res.best_val_acc;
  s["test_acc"] = res.test_acc_at_best;
  s["final"] = {{"train_loss", last.train_loss},
                {"train_acc", last.train_acc},
                {"val_acc", last.val_acc},
                {"test_acc", last.test_acc}};
  s["mu_init"] = out.mu_init;
  s["mu_init_fallback"] = out.used_fallback;
  s["stopped_early"] = res.stopped_early;
  s["diverged"] = res.diverged;
  s["divergence"] = res.divergence;
  s["layers"] = layers_json(model, last);
  if (res.best_epoch > 0) s["layers_at_best"] = layers_json(model, res.history[res.best_epoch - 1]);

  restore(model, res.best);
  std::vector<std::size_t> copies = c.invariance.copies;
  if (model.layers().empty()) copies = {1};
  json inv = {{"transform", c.invariance.transform}, {"range", c.invariance.range}};
  std::string status = res.diverged ? "diverged" : "ok";
  out.exit_code = res.diverged ? kExitDivergence : kExitOk;
  try {
    inv["per_copies"] = report_json(copies_sweep(model, c, data.test, copies));
  } catch (const DegenerateMetricError& e) {
    inv["error"] = e.what();
    if (!res.diverged) {
      status = "degenerate_metric";
      out.exit_code = kExitDegenerate;
    }
  }
  s["invariance"] = inv;
  s["status"] = status;
  s["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s["config"] = to_json(c);
  write_file_atomic(dir / "summary.json", s.dump(2) + "\n");
  out.summary = std::move(s);
  if (res.diverged) log << "training diverged: " << res.divergence << std::endl;
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& c, std::size_t jobs, std::ostream& log, int* exit_code) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir = c.output;
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.json", to_json(c).dump(2) + "\n");
  const DatasetSplits data = make_data(c);

  struct Job {
    std::size_t width, depth;
    std::string method;
  };
  std::vector<Job> grid;
  for (auto d : c.sweep.depths) {
    for (auto w : c.sweep.widths) {
      for (const char* m : {"baseline", "oracle", "augnet"}) grid.push_back({w, d, m});
    }
  }
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  jobs = std::clamp<std::size_t>(jobs, 1, grid.size());

  auto work = [&] {
    if (jobs > 1) omp_set_num_threads(1);
    for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) {
      try {
        const auto& job = grid[i];
        const auto t0 = std::chrono::steady_clock::now();
        ExperimentConfig jc = c;
        jc.trunk = TrunkKind::mlp;
        jc.mlp_widths.assign(job.depth, job.width);
        const bool aug = job.method == "augnet";
        AugNetModel model = make_model(jc, jc.augment.mu_init, aug ? jc.augment.layers : 0);
        TrainConfig tc = train_config(jc);
        if (job.method == "oracle") {
          const double sr = jc.dataset.sample_rate, hw = jc.dataset.freq_halfwidth;
          tc.input_augment = [sr, hw](const Tensor& x, Rng& rng) { return oracle_augment(x, rng, sr, hw); };
        }
        const TrainResult res = train(model, data, tc);
        restore(model, res.best);
        const std::size_t k = aug ? jc.augment.copies_eval : 1;
        const auto rep = copies_sweep(model, jc, data.test, std::span<const std::size_t>(&k, 1));
        SweepRow& row = rows[i];
        row.width = job.width;
        row.depth = job.depth;
        row.method = job.method;
        row.params = model.trunk().param_count();
        row.test_acc = rep[0].test_acc;
        row.invariance = rep[0].invariance;
        row.best_epoch = res.best_epoch;
        row.diverged = res.diverged;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::lock_guard lock(log_mutex);
        log << "width " << row.width << " depth " << row.depth << " " << row.method << ": test " << row.test_acc
            << " inv " << row.invariance.median << " (" << row.seconds << " s)" << std::endl;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const DegenerateMetricError& e) {
      log << grid[i].method << " width " << grid[i].width << " depth " << grid[i].depth << ": " << e.what() << std::endl;
      rows[i] = SweepRow{};
      rows[i].width = grid[i].width;
      rows[i].depth = grid[i].depth;
      rows[i].method = grid[i].method;
      code = std::max(code, static_cast<int>(kExitDegenerate));
    }
  }
  for (const auto& r : rows) {
    if (r.diverged) code = kExitDivergence;
  }

  std::ostringstream csv;
  csv << "width,depth,method,params,test_acc,inv_median,inv_lower,inv_upper,best_epoch,seconds,diverged\n";
  json jrows = json::array();
  for (const auto& r : rows) {
    csv << r.width << ',' << r.depth << ',' << r.method << ',' << r.params << ',' << format_double(r.test_acc) << ','
        << format_double(r.invariance.median) << ',' << format_double(r.invariance.lower) << ','
        << format_double(r.invariance.upper) << ',' << r.best_epoch << ',' << format_double(r.seconds) << ','
        << (r.diverged ? 1 : 0) << '\n';
    jrows.push_back({{"width", r.width},
                     {"depth", r.depth},
                     {"method", r.method},
                     {"params", r.params},
                     {"test_acc", r.test_acc},
                     {"inv_median", r.invariance.median},
                     {"inv_lower", r.invariance.lower},
                     {"inv_upper", r.invariance.upper},
                     {"best_epoch", r.best_epoch},
                     {"diverged", r.diverged}});
  }
  write_file_atomic(dir / "sweep.csv", csv.str());

  Panel inv{"Median invariance", "trunk parameters", "Inv", {}};
  Panel acc{"Test accuracy", "trunk parameters", "accuracy", {}};
  for (const char* m : {"baseline", "oracle", "augnet"}) {
    for (auto d : c.sweep.depths) {
      Series si{std::string(m) + " depth " + std::to_string(d), {}, {}}, sa = si;
      for (const auto& r : rows) {
        if (r.method != m || r.depth != d) continue;
        si.x.push_back(static_cast<double>(r.params));
        si.y.push_back(r.invariance.median);
        sa.x.push_back(static_cast<double>(r.params));
        sa.y.push_back(r.test_acc);
      }
      inv.series.push_back(std::move(si));
      acc.series.push_back(std::move(sa));
    }
  }
  write_file_atomic(dir / "capacity.svg", svg_line_charts({inv, acc}));

  json s;
  s["preset"] = std::string(to_string(c.preset));
  s["seed"] = c.seed;
  s["rows"] = jrows;
  s["status"] = code == kExitOk ? "ok" : code == kExitDivergence ? "diverged" : "degenerate_metric";
  s["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s["config"] = to_json(c);
  write_file_atomic(dir / "summary.json", s.dump(2) + "\n");
  if (exit_code) *exit_code = code;
  return rows;
}

int run_experiment(const ExperimentConfig& c, std::size_t jobs, std::ostream& log) {
  if (c.preset == Preset::capacity_sweep) {
    int code = kExitOk;
    run_sweep(c, jobs, log, &code);
    return code;
  }
  return run_single(c, log).exit_code;
}

}  // namespace augnet
