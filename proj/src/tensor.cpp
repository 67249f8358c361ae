#include "augnet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "augnet/error.hpp"

namespace augnet {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor() : shape_{0}, data_(std::make_shared<const std::vector<double>>()) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (numel(shape_) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not match data length " + std::to_string(data.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_ = std::make_shared<const std::vector<double>>(numel(shape_), fill);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

std::int64_t Tape::append(Node node) {
  nodes_.push_back(std::move(node));
  grads_.emplace_back();
  return static_cast<std::int64_t>(nodes_.size() - 1);
}

Tensor Tape::watch(const Tensor& value, std::string name) {
  if (value.tape_ != nullptr) throw TapeError("watch(): tensor is already on a tape");
  Node node;
  node.op = std::move(name);
  node.numel = value.size();
  node.leaf = true;
  Tensor t = value;
  t.tape_ = this;
  t.node_ = append(std::move(node));
  return t;
}

Tensor Tape::record(std::string_view op, Shape shape, std::vector<double> data,
                    std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  return record(op, std::move(shape), std::move(data), std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Tensor Tape::record(std::string_view op, Shape shape, std::vector<double> data, std::span<const Tensor* const> inputs,
                    BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Tensor* in : inputs) {
    if (in->tape_ == nullptr) continue;
    if (tape != nullptr && tape != in->tape_) throw TapeError(std::string(op) + ": operands live on different tapes");
    tape = in->tape_;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      std::ostringstream os;
      os << op << ": non-finite output at element " << i;
      if (tape != nullptr) os << " (node " << tape->nodes_.size() << ")";
      throw NumericError(os.str());
    }
  }
  Tensor out(std::move(shape), std::move(data));
  if (tape == nullptr) return out;

  Node node;
  node.op = std::string(op);
  node.numel = out.size();
  node.parents.reserve(inputs.size());
  for (const Tensor* in : inputs) node.parents.push_back(in->tape_ ? in->node_ : -1);
  node.backward = std::move(backward);
  out.tape_ = tape;
  out.node_ = tape->append(std::move(node));
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape_ != this) throw TapeError("backward(): loss is not recorded on this tape");
  if (loss.size() != 1) throw TapeError("backward(): seed must be a scalar, got shape " + to_string(loss.shape()));
  if (backward_done_) throw TapeError("backward(): gradients already computed; call clear_gradients() first");
  backward_done_ = true;

  visits_ = 0;
  visit_counts_.assign(nodes_.size(), 0);
  const auto root = static_cast<std::size_t>(loss.node_);
  grads_[root].assign(1, 1.0);

  std::vector<std::span<double>> grad_in;
  for (std::size_t i = root + 1; i-- > 0;) {
    if (grads_[i].empty()) continue;
    Node& node = nodes_[i];
    ++visits_;
    ++visit_counts_[i];
    if (node.leaf) continue;

    grad_in.assign(node.parents.size(), std::span<double>{});
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::int64_t p = node.parents[k];
      if (p < 0) continue;
      auto& g = grads_[static_cast<std::size_t>(p)];
      if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(p)].numel, 0.0);
      grad_in[k] = g;
    }
    node.backward(grads_[i], grad_in);
    // Intermediate gradients are not observable; release them early.
    std::vector<double>().swap(grads_[i]);
  }
}

std::vector<double> Tape::grad(const Tensor& leaf) const {
  if (leaf.tape_ != this) throw TapeError("grad(): tensor is not recorded on this tape");
  const auto& g = grads_[static_cast<std::size_t>(leaf.node_)];
  if (g.empty()) return std::vector<double>(leaf.size(), 0.0);
  return g;
}

Tensor Tape::grad_tensor(const Tensor& leaf) const { return Tensor(leaf.shape(), grad(leaf)); }

void Tape::clear_gradients() {
  for (auto& g : grads_) std::vector<double>().swap(g);
  backward_done_ = false;
  visits_ = 0;
}

}  // namespace augnet
