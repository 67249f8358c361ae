#include "augnet/params.hpp"

#include "augnet/error.hpp"
#include "augnet/ops.hpp"

namespace augnet {

std::size_t ParameterStore::add(std::string name, Shape shape, std::vector<double> value, ParamGroup group) {
  if (numel(shape) != value.size()) {
    throw ShapeError("parameter " + name + ": " + std::to_string(value.size()) + " values for shape " + to_string(shape));
  }
  if (find(name)) throw ConfigError("duplicate parameter name " + name);
  params_.push_back({std::move(name), std::move(shape), std::move(value), group});
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterStore::count(std::optional<ParamGroup> group) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!group || p.group == *group) n += p.value.size();
  }
  return n;
}

std::vector<Tensor> ParameterStore::bind(Tape* tape) const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    Tensor t(p.shape, p.value);
    out.push_back(tape ? tape->watch(t, p.name) : t);
  }
  return out;
}

std::vector<double> flatten_values(const ParameterStore& store) {
  std::vector<double> out;
  out.reserve(store.count());
  for (const auto& p : store) out.insert(out.end(), p.value.begin(), p.value.end());
  return out;
}

std::vector<Tensor> split_flat(const Tensor& flat, const ParameterStore& store) {
  if (flat.rank() != 1 || flat.size() != store.count()) throw ShapeError("split_flat: size mismatch");
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const auto& p : store) {
    out.push_back(reshape(slice_rows(flat, offset, offset + p.value.size()), p.shape));
    offset += p.value.size();
  }
  return out;
}

}  // namespace augnet
