#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "augnet/rng.hpp"
#include "augnet/tensor.hpp"

// Differentiable augmentations T(x; mu) with mu in [0, 1].
//
// Transforms act on a batch: images are (B, C, H, W) and signals (B, C, n).
// Randomness is drawn up front into a NoiseDraw, one draw per example, so the
// forward pass is a deterministic function of (x, mu) and gradients wrt mu are
// well defined. mu = 0 is the identity for every kind.

namespace augnet {

enum class TransformKind {
  translate_x,
  translate_y,
  rotate,
  shear_x,
  shear_y,
  hflip,
  sample_pairing,
  brightness,
  contrast,
  frequency_shift,
  ft_surrogate,
  gaussian_noise,
};

enum class Estimator { reparam, straight_through };
enum class Modality { image, signal };

std::string_view to_string(TransformKind kind);
/// Throws ConfigError for unknown names.
TransformKind transform_kind_from_string(std::string_view name);
const std::vector<TransformKind>& all_transform_kinds();

bool accepts(TransformKind kind, Modality modality);
/// Modality of a batch from its rank: 4 -> image, 3 -> signal; anything else throws ShapeError.
Modality modality_of(const Tensor& x);

struct TransformSpec {
  TransformKind kind = TransformKind::brightness;
  /// Physical strength at mu = 1: normalized offset for translations (1 = half
  /// the frame), radians for rotation, coefficient for shear, Hz for frequency
  /// shift, standard deviation for noise, fraction of a full turn for the
  /// surrogate phases, and the blend/flip probability scale otherwise.
  double range = 1.0;
  Estimator estimator = Estimator::reparam;
  /// Signal sampling rate in Hz (frequency_shift only).
  double sample_rate = 100.0;

  /// Default spec for a kind (translation 1.0, rotation pi, shear 0.3, ...).
  static TransformSpec defaults(TransformKind kind);
  /// Throws ConfigError on a non-positive range or an estimator the kind cannot use.
  void validate() const;
  /// mu * range, the quantity reported in telemetry.
  double physical(double mu) const { return mu * range; }
};

/// Frozen randomness for one application of a transform to a batch.
struct NoiseDraw {
  std::vector<double> epsilon;       // one per example
  std::vector<double> aux;           // phases or Gaussian noise, example-major
  std::vector<std::size_t> partner;  // sample_pairing partner per example
};

NoiseDraw sample_draw(const TransformSpec& spec, const Shape& batch_shape, Rng& rng);

/// T(x; mu) for the whole batch; `mu` is a single-element tensor.
Tensor apply_transform(const TransformSpec& spec, const Tensor& x, const Tensor& mu, const NoiseDraw& draw);

// Individual transforms, exposed for tests and the oracle baseline.
Tensor affine_warp(const Tensor& images, TransformKind kind, const Tensor& mu, std::span<const double> epsilon,
                   double range);
Tensor hflip(const Tensor& images, const Tensor& mu, std::span<const double> uniform);
Tensor blend(TransformKind kind, const Tensor& x, const Tensor& mu, std::span<const double> epsilon,
             std::span<const std::size_t> partner = {}, double range = 1.0);
Tensor frequency_shift(const Tensor& signals, const Tensor& mu, std::span<const double> epsilon, double sample_rate,
                       double max_shift_hz);
Tensor ft_surrogate(const Tensor& signals, const Tensor& mu, std::span<const double> phases, double range = 1.0);
Tensor gaussian_noise(const Tensor& x, const Tensor& mu, std::span<const double> z, double sigma_max);

// Exact pixel permutations, used to build finite groups.
Tensor flip_horizontal(const Tensor& images);
/// Rotation of square images by quarter_turns * 90 degrees counter-clockwise.
Tensor rotate90(const Tensor& images, int quarter_turns);

}  // namespace augnet
