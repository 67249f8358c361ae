#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "augnet/tensor.hpp"

namespace augnet {

enum class ParamGroup { trunk, aug_weights, aug_magnitudes };

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  ParamGroup group = ParamGroup::trunk;
};

/// Ordered, named parameter tensors of a model. Forward passes bind them to a
/// fresh tape; the optimizer updates `value` in place between passes.
class ParameterStore {
 public:
  std::size_t add(std::string name, Shape shape, std::vector<double> value, ParamGroup group);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  std::optional<std::size_t> find(std::string_view name) const;

  /// Number of scalars, optionally restricted to one group.
  std::size_t count(std::optional<ParamGroup> group = std::nullopt) const;

  /// One tensor per parameter, watched on `tape` when it is non-null.
  std::vector<Tensor> bind(Tape* tape) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

/// All parameter values concatenated in store order.
std::vector<double> flatten_values(const ParameterStore& store);

/// Inverse of flatten_values on a (possibly taped) 1-D tensor: one reshaped slice per parameter.
std::vector<Tensor> split_flat(const Tensor& flat, const ParameterStore& store);

}  // namespace augnet
