#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "augnet/nn.hpp"
#include "augnet/params.hpp"
#include "augnet/rng.hpp"

namespace augnet {

enum class TrunkKind { mlp, sinus_cnn, sprite_cnn };

std::string_view to_string(TrunkKind kind);
TrunkKind trunk_kind_from_string(std::string_view name);

struct TrunkConfig {
  TrunkKind kind = TrunkKind::sinus_cnn;
  std::vector<std::size_t> mlp_widths;
  Shape input_shape{1, 1024};  // per example, without the batch axis
  std::size_t num_classes = 4;
};

/// Predictive network f. Parameters live in a ParameterStore (group `trunk`);
/// batch-norm running statistics live in the trunk itself.
///
///   mlp         flatten -> [dense, relu] x widths -> dense
///   sinus_cnn   2 x [conv1d(2, k3, pad 1), bn, relu] -> maxpool 2 -> global mean pool -> dense
///   sprite_cnn  [conv2d(c, k3, pad 1), bn, relu] for c = 32, 64, 128, 256 with maxpool 2 after
///               blocks 2-4, then maxpool 4 stride 1 over the final 4x4 map -> dense
class Trunk {
 public:
  Trunk() = default;
  /// Registers parameters (Kaiming-uniform fan-in weights, zero biases, unit BN scale).
  /// Convolutions feed batch norm directly and carry no bias.
  Trunk(const TrunkConfig& config, ParameterStore& store, Rng& rng);

  /// Pre-softmax outputs (B, num_classes). `params` is the bound store. Train
  /// mode normalizes with batch statistics and updates the running ones.
  Tensor forward(std::span<const Tensor> params, const Tensor& x, Mode mode);

  const TrunkConfig& config() const { return config_; }
  std::size_t param_count() const { return param_count_; }
  std::vector<RunningStats>& running_stats() { return stats_; }
  const std::vector<RunningStats>& running_stats() const { return stats_; }

 private:
  enum class Op { dense, conv1d, conv2d, batch_norm, relu, maxpool1d, maxpool2d, global_mean_pool, flatten };
  struct Layer {
    Op op;
    std::size_t weight = 0;  // parameter indices (gamma/beta for batch norm)
    std::size_t bias = 0;
    std::size_t stats = 0;
    std::size_t size = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
  };

  void add_dense(ParameterStore& store, Rng& rng, std::size_t in, std::size_t out);
  void add_conv(ParameterStore& store, Rng& rng, Op op, std::size_t in, std::size_t out, std::size_t k);
  void add_batch_norm(ParameterStore& store, std::size_t channels);
  std::string next_name(std::string_view what);

  TrunkConfig config_;
  std::vector<Layer> layers_;
  std::vector<RunningStats> stats_;
  std::size_t param_count_ = 0;
};

/// Closed-form parameter count of a configuration.
std::size_t trunk_param_count(const TrunkConfig& config);

}  // namespace augnet
