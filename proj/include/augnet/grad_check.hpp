#pragma once

#include <functional>

#include "augnet/tensor.hpp"

namespace augnet {

/// Scalar function of one tensor, evaluated on the given tape. It must be
/// deterministic: any randomness has to be frozen before the check.
using ScalarFn = std::function<Tensor(Tape& tape, const Tensor& x)>;

/// Optional override of the analytic gradient (used to plant broken gradients in negative tests).
using GradientFn = std::function<std::vector<double>(const Tensor& x)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of `f` at `point` with central differences of
/// step `epsilon`. Per coordinate the error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const ScalarFn& f, const Tensor& point, double epsilon = 1e-6,
                           const GradientFn& analytic_override = {});

/// Autodiff gradient of `f` at `x`.
std::vector<double> autodiff_gradient(const ScalarFn& f, const Tensor& x);

/// Central-difference gradient of `f` at `x`.
std::vector<double> numeric_gradient(const ScalarFn& f, const Tensor& x, double epsilon);

}  // namespace augnet
