#include <iostream>

#include "CLI11.hpp"
#include "augnet/cli.hpp"

namespace {

void add_common(CLI::App* cmd, augnet::cli::CommonOptions& o, bool with_config = true) {
  if (with_config) cmd->add_option("--config", o.config, "Experiment config (JSON, comments allowed)");
  cmd->add_option("--set", o.sets, "Override a config key, e.g. train.epochs=5 (repeatable)");
  cmd->add_option("--out", o.out, "Output location");
  cmd->add_option("--seed", o.seed, "Experiment seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned augmentation layers with a selective invariance regularizer"};
  app.require_subcommand(1);
  augnet::cli::CommonOptions o;

  auto* run = app.add_subcommand("run", "Train a preset or custom experiment");
  add_common(run, o);
  run->add_option("--jobs", o.jobs, "Parallel worker slots for sweeps")->check(CLI::PositiveNumber);

  std::string scope = "all";
  std::optional<std::string> perturb;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient suites");
  grad->add_option("scope", scope, "ops | augmentations | models | all");
  grad->add_option("--perturb", perturb, "Corrupt one item's analytic gradient (negative control)");
  grad->add_option("--seed", o.seed, "Unused; accepted for uniformity");

  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> checkpoint;
  bool untrained = false;
  auto* inv = app.add_subcommand("invariance-report", "Invariance of a trained model for several copy counts");
  inv->add_option("--run", run_dir, "Run directory holding config.json and model.ckpt")->required();
  inv->add_option("--checkpoint", checkpoint, "Checkpoint to score instead of <run>/model.ckpt");
  inv->add_flag("--untrained", untrained, "Score the freshly initialized model");
  add_common(inv, o, false);

  auto* exp = app.add_subcommand("export-dataset", "Write the configured dataset splits as binary containers");
  add_common(exp, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  augnet::cli::tune_allocator();
  return augnet::cli::guarded(
      [&] {
        if (*run) return augnet::cli::run_cmd(o, std::cerr);
        if (*grad) return augnet::cli::grad_check_cmd(scope, perturb, std::cout);
        if (*inv) return augnet::cli::invariance_report_cmd(run_dir, checkpoint, untrained, o, std::cerr);
        return augnet::cli::export_dataset_cmd(o, std::cerr);
      },
      std::cerr);
}
