#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "augnet/params.hpp"
#include "augnet/rng.hpp"
#include "augnet/transforms.hpp"
#include "augnet/trunks.hpp"

namespace augnet {

/// One augmentation layer: Q transforms mixed with weights softmax(w') at magnitudes mu.
/// The indices refer to (Q)-shaped entries of the model's ParameterStore.
struct AugLayer {
  std::vector<TransformSpec> transforms;
  std::size_t hidden = 0;
  std::size_t magnitude = 0;
};

enum class RegKind { selective, augerino, none };
std::string_view to_string(RegKind kind);
RegKind reg_kind_from_string(std::string_view name);

/// Smoothing inside the regularizer norms.
inline constexpr double kNormSmoothing = 1e-12;

/// Augmentation module in front of a trunk, with C-copy output averaging.
class AugNetModel {
 public:
  AugNetModel() = default;
  AugNetModel(const TrunkConfig& trunk, Rng& rng);

  /// Appends a layer; hidden weights start at 0 (uniform w), magnitudes at `mu_init`.
  void add_layer(std::vector<TransformSpec> transforms, double mu_init);

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  Trunk& trunk() { return trunk_; }
  const Trunk& trunk() const { return trunk_; }
  const std::vector<AugLayer>& layers() const { return layers_; }

  /// Current softmax(w') and mu of a layer, read from the store.
  std::vector<double> weights(std::size_t layer) const;
  std::vector<double> magnitudes(std::size_t layer) const;

  /// Clamps every magnitude into [0, 1].
  void project_magnitudes();

  std::size_t copies_train = 4;
  std::size_t copies_eval = 4;

 private:
  ParameterStore params_;
  Trunk trunk_;
  std::vector<AugLayer> layers_;
};

/// softmax(w'), recorded on the tape of `hidden`.
Tensor effective_weights(const Tensor& hidden);

/// sum_q w_q T_q(x; mu_q) with one fresh draw per transform and example.
Tensor aug_layer_forward(const Tensor& x, const AugLayer& layer, std::span<const Tensor> params, Rng& rng);

/// Layers applied in order.
Tensor augmentation_forward(const Tensor& x, std::span<const AugLayer> layers, std::span<const Tensor> params, Rng& rng);

/// Mean of the trunk's pre-softmax outputs over `copies` independent augmentations of x.
Tensor augnet_forward(const Tensor& x, AugNetModel& model, std::size_t copies, std::span<const Tensor> params, Rng& rng,
                      Mode mode);

/// Gradient-free evaluation in chunks of `chunk` examples (eval mode).
Tensor predict(AugNetModel& model, const Tensor& x, std::size_t copies, Rng& rng, std::size_t chunk = 256);

/// Sum over layers of -sqrt(sum_q (w_q mu_q)^2 + delta).
Tensor selective_regularizer(std::span<const AugLayer> layers, std::span<const Tensor> params);
/// Sum over layers of -sqrt(sum_q mu_q^2 + delta); independent of w'.
Tensor augerino_regularizer(std::span<const AugLayer> layers, std::span<const Tensor> params);
Tensor regularizer(RegKind kind, std::span<const AugLayer> layers, std::span<const Tensor> params);

/// Closed-form d(R^2)/d(w_i) for Q = 2 on the simplex, R^2 = (w1 m1)^2 + (w2 m2)^2 with
/// the other weight eliminated: 2 w_i m_i^2 - 2 w_j m_j^2 = 2 m_i^2 - 2 (1 - w_i)(m1^2 + m2^2).
std::array<double, 2> reg_grad_analytic(std::array<double, 2> w, std::array<double, 2> mu);

struct LossTerms {
  Tensor total;
  Tensor logits;
  double cross_entropy = 0.0;
  double penalty = 0.0;
};

/// Cross-entropy of the averaged outputs plus lambda times the chosen regularizer.
LossTerms training_loss(const Tensor& x, std::span<const int> labels, AugNetModel& model, std::span<const Tensor> params,
                        double lambda, RegKind reg, std::size_t copies, Rng& rng, Mode mode = Mode::train);

/// An exact input permutation (or any deterministic map) acting on a batch.
using GroupElement = std::function<Tensor(const Tensor&)>;

std::vector<GroupElement> trivial_group();
std::vector<GroupElement> flip_group();
std::vector<GroupElement> rotation_group();

/// Throws ConfigError unless the elements (evaluated on `probe`) contain the
/// identity and are closed under composition and inverse.
void check_group(std::span<const GroupElement> group, const Tensor& probe);

/// (1/|G|) sum_g f(g x), after verifying the group structure on x.
Tensor group_average_exact(const std::function<Tensor(const Tensor&)>& f, std::span<const GroupElement> group,
                           const Tensor& x);

}  // namespace augnet
