#include "augnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace augnet {

std::vector<double> autodiff_gradient(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  const Tensor leaf = tape.watch(x.detach(), "x");
  const Tensor y = f(tape, leaf);
  tape.backward(y);
  return tape.grad(leaf);
}

std::vector<double> numeric_gradient(const ScalarFn& f, const Tensor& x, double epsilon) {
  std::vector<double> values(x.data().begin(), x.data().end());
  std::vector<double> grad(values.size());
  auto eval = [&](std::vector<double> v) {
    Tape tape;
    return f(tape, Tensor(x.shape(), std::move(v))).item();
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto plus = values, minus = values;
    plus[i] += epsilon;
    minus[i] -= epsilon;
    grad[i] = (eval(std::move(plus)) - eval(std::move(minus))) / (2.0 * epsilon);
  }
  return grad;
}

GradCheckResult grad_check(const ScalarFn& f, const Tensor& point, double epsilon, const GradientFn& analytic_override) {
  const auto analytic = analytic_override ? analytic_override(point) : autodiff_gradient(f, point);
  const auto numeric = numeric_gradient(f, point, epsilon);
  GradCheckResult result;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    const double err = std::abs(analytic[i] - numeric[i]) / denom;
    if (i == 0 || err > result.max_rel_error) result = {err, i, analytic[i], numeric[i]};
  }
  return result;
}

}  // namespace augnet
