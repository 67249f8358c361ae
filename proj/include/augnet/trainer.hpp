#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "augnet/augnet.hpp"
#include "augnet/checkpoint.hpp"
#include "augnet/datasets.hpp"

namespace augnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 coefficient, applied to trunk parameters only.
  double weight_decay = 0.0;
};

/// Bias-corrected Adam over a ParameterStore. Magnitude parameters are clamped
/// into [0, 1] after every step.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamConfig config);

  /// `grads` holds one gradient per store entry. Throws NumericError naming the
  /// first parameter with a non-finite gradient, before anything is modified.
  void step(ParameterStore& store, std::span<const std::vector<double>> grads);

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  /// Indexed [layer][transform].
  std::vector<std::vector<double>> weights, magnitudes, ranges;
  double seconds = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  AdamConfig adam;
  double lambda = 0.2;
  RegKind reg = RegKind::selective;
  /// Early stopping on validation accuracy; 0 disables it.
  std::size_t patience = 0;
  std::uint64_t seed = 0;
  /// Optional fixed augmentation of each training batch (the oracle baseline).
  std::function<Tensor(const Tensor&, Rng&)> input_augment;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  /// Model state with the best validation accuracy (the initial state when no epoch ran).
  Checkpoint best;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc_at_best = 0.0;
  bool stopped_early = false;
  bool diverged = false;
  std::string divergence;
};

/// Weights, magnitudes and physical ranges of every augmentation layer.
void fill_aug_state(const AugNetModel& model, EpochRecord& rec);

/// Accuracy of C-copy eval-mode predictions.
double evaluate_accuracy(AugNetModel& model, const Dataset& data, std::size_t copies, Rng& rng);

/// Epoch loop: shuffle, penalized loss with copies_train, Adam, evaluation with copies_eval.
/// A non-finite loss or gradient ends training with `diverged` set; the model keeps its last good state.
TrainResult train(AugNetModel& model, const DatasetSplits& data, const TrainConfig& config);

}  // namespace augnet
