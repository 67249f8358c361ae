#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "augnet/config.hpp"
#include "augnet/metrics.hpp"
#include "augnet/trainer.hpp"

namespace augnet {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitDivergence = 3, kExitDegenerate = 4 };

/// Dataset of a config: the dataset spec with the experiment seed.
DatasetSplits make_data(const ExperimentConfig& c);

/// Trunk initialized from the experiment seed, plus `augment.layers` layers at `mu_init`.
AugNetModel make_model(const ExperimentConfig& c, double mu_init, std::size_t layers);

/// The probe transform of the invariance metric, applied at full magnitude.
InputTransform make_probe(const ExperimentConfig& c);

struct CopiesReport {
  std::size_t copies = 0;
  InvarianceReport invariance;
  double test_acc = 0.0;
};

/// Invariance and accuracy of C-copy predictions on the first `invariance.examples` test examples
/// (accuracy uses the whole test split), one entry per C. Rethrows DegenerateMetricError.
std::vector<CopiesReport> copies_sweep(AugNetModel& model, const ExperimentConfig& c, const Dataset& test,
                                       std::span<const std::size_t> copies);

struct RunOutcome {
  int exit_code = kExitOk;
  TrainResult train;
  bool used_fallback = false;
  double mu_init = 0.0;
  nlohmann::json summary;
};

/// Trains one model, writes config.json, epochs.csv, summary.json, model.ckpt,
/// learned_params.svg and accuracy.svg into c.output.
RunOutcome run_single(const ExperimentConfig& c, std::ostream& log);

struct SweepRow {
  std::size_t width = 0, depth = 0;
  std::string method;
  std::size_t params = 0;
  double test_acc = 0.0;
  InvarianceReport invariance;
  std::size_t best_epoch = 0;
  double seconds = 0.0;
  bool diverged = false;
};

/// capacity_sweep: every (width, depth) x {baseline, oracle, augnet} on up to `jobs`
/// worker threads; writes sweep.csv, summary.json and capacity.svg.
std::vector<SweepRow> run_sweep(const ExperimentConfig& c, std::size_t jobs, std::ostream& log, int* exit_code = nullptr);

/// Dispatches on the preset; returns the process exit code.
int run_experiment(const ExperimentConfig& c, std::size_t jobs, std::ostream& log);

}  // namespace augnet
