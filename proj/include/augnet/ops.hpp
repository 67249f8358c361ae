#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "augnet/tensor.hpp"

namespace augnet {

// Elementwise arithmetic. Operands must have equal shapes, or one of them holds
// a single element and is broadcast. Nothing else broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_constant(const Tensor& x, double value);
Tensor negate(const Tensor& x);

// Unary maps. relu'(0) = 0; clamp passes gradient only strictly inside (lo, hi).
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor square(const Tensor& x);

// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum(x * weights) with constant weights; the usual random probe in gradient checks.
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
/// Element `i` of the flattened tensor as a scalar.
Tensor pick(const Tensor& x, std::size_t i);
/// Stable softmax of a 1-D tensor.
Tensor softmax(const Tensor& x);
/// Concatenates along axis 0; trailing dimensions must agree.
Tensor concat(std::span<const Tensor> parts);
/// Rows [begin, end) along axis 0.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Rows gathered along axis 0 (indices may repeat).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Stacks `times` copies of x along axis 0: (B, ...) -> (times * B, ...).
Tensor tile_rows(const Tensor& x, std::size_t times);
/// Inverse of tile_rows in the averaging sense: (groups * B, ...) -> (B, ...) mean over groups.
Tensor mean_of_groups(const Tensor& x, std::size_t groups);

}  // namespace augnet
