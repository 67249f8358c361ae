#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "augnet/tensor.hpp"

namespace augnet {

/// x(B, in) -> x * W^T + b, W(out, in), b(out).
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// x(B, Cin, L), W(Cout, Cin, K), b(Cout) -> (B, Cout, floor((L + 2 pad - K) / stride) + 1).
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1, std::size_t padding = 0);

/// x(B, Cin, H, W), W(Cout, Cin, K, K), b(Cout); same output-size formula per spatial axis.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1, std::size_t padding = 0);

/// x(B, C, L) -> (B, C, (L - size) / stride + 1); gradient routes to the first maximum.
Tensor maxpool1d(const Tensor& x, std::size_t size, std::size_t stride);
Tensor maxpool2d(const Tensor& x, std::size_t size, std::size_t stride);

/// x(B, C, ...) -> (B, C), mean over every trailing axis.
Tensor global_mean_pool(const Tensor& x);

/// x(B, ...) -> (B, prod(...)).
Tensor flatten(const Tensor& x);

enum class Mode { train, eval };

struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;

  explicit RunningStats(std::size_t channels = 0) : mean(channels, 0.0), var(channels, 1.0) {}
};

/// Per-channel batch normalization over axis 1 of x(B, C, ...).
///
/// Train mode normalizes with the biased batch variance and folds the unbiased
/// variance into `stats` with weight `momentum`; eval mode uses `stats`.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, Mode mode,
                  double momentum = 0.1, double eps = 1e-5);

/// Mean over the batch of -log softmax(logits)[label]; logits(B, K).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace augnet
