#include "augnet/cli.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "augnet/checkpoint.hpp"
#include "augnet/config.hpp"
#include "augnet/error.hpp"
#include "augnet/experiment.hpp"
#include "augnet/grad_suites.hpp"
#include "augnet/report.hpp"

namespace augnet::cli {

int run_cmd(const CommonOptions& o, std::ostream& log) {
  const ExperimentConfig c = resolve_config(o.config, o.sets, o.seed, o.out);
  log << "preset " << to_string(c.preset) << ", seed " << c.seed << ", output " << c.output << std::endl;
  const int code = run_experiment(c, o.jobs, log);
  log << "wrote " << c.output << std::endl;
  return code;
}

int grad_check_cmd(const std::string& scope, const std::optional<std::string>& perturb, std::ostream& out) {
  const auto items = run_grad_suites(grad_scope_from_string(scope), perturb);
  std::vector<const GradItem*> failed;
  for (const auto& g : items) {
    out << std::left << std::setw(14) << g.suite << std::setw(26) << g.name << std::scientific << std::setprecision(3)
        << g.error << " (tol " << g.tolerance << ") " << (g.passed() ? "ok" : "FAIL") << '\n'
        << std::defaultfloat;
    if (!g.passed()) failed.push_back(&g);
  }
  if (failed.empty()) {
    out << items.size() << " gradient checks passed\n";
    return kExitOk;
  }
  out << failed.size() << " of " << items.size() << " gradient checks failed:";
  for (const auto* g : failed) out << ' ' << g->name;
  out << '\n';
  return kExitCheckFailed;
}

int invariance_report_cmd(const std::filesystem::path& run, const std::optional<std::filesystem::path>& checkpoint,
                          bool untrained, const CommonOptions& o, std::ostream& log) {
  const ExperimentConfig c = resolve_config(run / "config.json", o.sets, o.seed);
  const DatasetSplits data = make_data(c);
  AugNetModel model = make_model(c, c.augment.mu_init, c.augment.layers);
  if (!untrained) restore(model, load_checkpoint(checkpoint.value_or(run / "model.ckpt")));
  const auto reports = copies_sweep(model, c, data.test, c.invariance.copies);

  std::ostringstream csv;
  csv << "copies,median,lower,upper,baseline,test_acc\n";
  for (const auto& r : reports) {
    csv << r.copies << ',' << format_double(r.invariance.median) << ',' << format_double(r.invariance.lower) << ','
        << format_double(r.invariance.upper) << ',' << format_double(r.invariance.baseline) << ','
        << format_double(r.test_acc) << '\n';
    log << "C=" << r.copies << " median Inv " << r.invariance.median << " [" << r.invariance.lower << ", "
        << r.invariance.upper << "] test acc " << r.test_acc << std::endl;
  }
  const std::filesystem::path path = o.out ? std::filesystem::path(*o.out) : run / "invariance.csv";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, csv.str());
  log << "wrote " << path.string() << std::endl;
  return kExitOk;
}

int export_dataset_cmd(const CommonOptions& o, std::ostream& log) {
  const ExperimentConfig c = resolve_config(o.config, o.sets, o.seed, o.out);
  const DatasetSplits data = make_data(c);
  const std::filesystem::path dir = c.output;
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const Dataset*> splits[] = {{"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, d] : splits) {
    const auto path = dir / (std::string(name) + ".augds");
    export_dataset(path, *d, c.dataset.kind);
    log << "wrote " << path.string() << " (" << d->size() << " examples)" << std::endl;
  }
  return kExitOk;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const DegenerateMetricError& e) {
    err << "degenerate metric: " << e.what() << std::endl;
    return kExitDegenerate;
  } catch (const NumericError& e) {
    err << "divergence: " << e.what() << std::endl;
    return kExitDivergence;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << std::endl;
    return kExitConfig;
  }
}

}  // namespace augnet::cli
