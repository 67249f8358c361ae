#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "augnet/augnet.hpp"
#include "augnet/datasets.hpp"
#include "augnet/transforms.hpp"
#include "augnet/trunks.hpp"
#include "json.hpp"

namespace augnet {

enum class Preset { sinusoids, sinusoids_multilayer, capacity_sweep, sprites, sprites_noreg, sprites_augerino_reg, custom };
std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view name);

struct AugmentSettings {
  std::size_t layers = 1;
  std::vector<TransformKind> transforms;
  /// Physical range at mu = 1, per kind; kinds not listed keep their defaults.
  std::map<TransformKind, double> ranges;
  double mu_init = 0.0;
  std::size_t copies_train = 4;
  std::size_t copies_eval = 4;
  /// Restart with `fallback_mu_init` when every magnitude is still exactly 0 after the first epoch.
  bool stall_fallback = true;
  double fallback_mu_init = 0.05;
};

struct TrainSettings {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  double lambda = 0.2;
  RegKind reg = RegKind::selective;
  std::size_t patience = 0;
};

struct InvarianceSettings {
  /// Transform kind name, or "identity".
  std::string transform = "frequency_shift";
  /// Physical range of the probe transform at mu = 1 (0 keeps the kind's default).
  double range = 0.5;
  std::vector<std::size_t> copies{1, 4, 10};
  /// Test examples scored (0 = all).
  std::size_t examples = 200;
};

struct SweepSettings {
  std::vector<std::size_t> widths{2, 4, 8, 16};
  std::vector<std::size_t> depths{1, 2};
};

/// Fully resolved experiment description. The trunk's input shape is derived from the dataset.
struct ExperimentConfig {
  Preset preset = Preset::sinusoids;
  std::uint64_t seed = 0;
  std::string output = "runs/sinusoids";
  DatasetSpec dataset;
  TrunkKind trunk = TrunkKind::sinus_cnn;
  std::vector<std::size_t> mlp_widths;
  AugmentSettings augment;
  TrainSettings train;
  InvarianceSettings invariance;
  SweepSettings sweep;

  TrunkConfig trunk_config() const;
  /// Transform specs of one layer, with range overrides and the dataset sample rate applied.
  std::vector<TransformSpec> layer_transforms() const;
  /// Throws ConfigError on inconsistent settings (modality, empty lists, ...).
  void validate() const;
};

ExperimentConfig preset_config(Preset p);

nlohmann::json to_json(const ExperimentConfig& c);
/// Strict conversion: unknown keys and wrongly typed values throw ConfigError.
ExperimentConfig from_json(const nlohmann::json& j);

/// Parses `key.path=value`; the value is read as JSON when possible, else as a string.
/// A bracketed list that is not valid JSON is split on commas into strings.
std::pair<std::string, nlohmann::json> parse_assignment(std::string_view text);

/// preset defaults <- config file (JSON, comments allowed) <- assignments <- explicit seed/output.
/// The preset is taken from the assignments, else the file, else "sinusoids".
ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> assignments,
                                std::optional<std::uint64_t> seed = std::nullopt,
                                std::optional<std::string> output = std::nullopt);

}  // namespace augnet
