#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace augnet::cli {

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> sets;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

int run_cmd(const CommonOptions& o, std::ostream& log);

/// `scope` is ops, augmentations, models or all; `perturb` plants a wrong gradient in one item.
int grad_check_cmd(const std::string& scope, const std::optional<std::string>& perturb, std::ostream& out);

/// Reads <run>/config.json and a checkpoint (default <run>/model.ckpt), applies `o.sets`,
/// and writes one row per invariance.copies entry to `o.out` (default <run>/invariance.csv).
/// `untrained` scores the freshly initialized model instead of the checkpoint.
int invariance_report_cmd(const std::filesystem::path& run, const std::optional<std::filesystem::path>& checkpoint,
                          bool untrained, const CommonOptions& o, std::ostream& log);

/// Writes train/val/test containers of the configured dataset into `o.out` (a directory).
int export_dataset_cmd(const CommonOptions& o, std::ostream& log);

/// Keeps large buffers in the heap instead of unmapping them after every batch (glibc only).
void tune_allocator();

/// Maps library exceptions to exit codes, printing the message to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace augnet::cli
