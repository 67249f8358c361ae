#pragma once

#include <functional>
#include <span>
#include <vector>

#include "augnet/rng.hpp"
#include "augnet/tensor.hpp"

namespace augnet {

/// 1 - <a, b> / (|a| |b|); 1 when either norm is below 1e-12.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Row-wise argmax of (B, K) outputs, ties to the lowest index.
std::vector<int> argmax_rows(const Tensor& outputs);

double accuracy(std::span<const int> predictions, std::span<const int> labels);
double accuracy(const Tensor& outputs, std::span<const int> labels);
/// Mean recall over the classes present in `labels`.
double balanced_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Linear-interpolation percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

struct InvarianceReport {
  std::vector<double> scores;
  double median = 0.0;
  double lower = 0.0;  // 12.5th percentile
  double upper = 0.0;  // 87.5th percentile
  double baseline = 0.0;
};

/// Pre-softmax outputs (B, K) for a batch; `rng` feeds any internal sampling.
using OutputFn = std::function<Tensor(const Tensor& x, Rng& rng)>;
/// Randomized input transform with one fresh draw per example.
using InputTransform = std::function<Tensor(const Tensor& x, Rng& rng)>;

/// Deterministic random cyclic permutation of 0..n-1 (a derangement for n >= 2).
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

/// Inv_T per example: (b - d(f(x), f(T x))) / b, with b the mean distance
/// between f(x_i) and f(x_pi(i)) over a seeded derangement pi. f(x) and f(T x)
/// see identical model randomness, so T = identity scores exactly 1.
/// Throws DegenerateMetricError when b < 1e-9 and ConfigError for fewer than 2 examples.
InvarianceReport invariance(const OutputFn& f, const Tensor& x, const InputTransform& transform, Rng& rng);

}  // namespace augnet
