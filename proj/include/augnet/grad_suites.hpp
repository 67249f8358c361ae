#pragma once

#include <optional>
#include <string>
#include <vector>

namespace augnet {

enum class GradScope { ops, augmentations, models, all };
GradScope grad_scope_from_string(std::string_view name);

inline constexpr double kOpsTolerance = 1e-5;
inline constexpr double kAugmentationTolerance = 1e-4;
inline constexpr double kModelTolerance = 1e-4;

struct GradItem {
  std::string suite;
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

/// Finite-difference suites. Augmentations report one item per transform kind:
/// the worse of its magnitude and input gradients (hflip's straight-through
/// magnitude gradient is compared with the derivative of its exact expectation).
/// `perturb` names an item whose analytic gradient is scaled by 1.01 (negative control).
std::vector<GradItem> run_grad_suites(GradScope scope, const std::optional<std::string>& perturb = std::nullopt);

}  // namespace augnet
