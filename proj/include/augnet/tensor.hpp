#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace augnet {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

/// Dense row-major array of doubles with an optional node on a gradient tape.
///
/// The payload is immutable and shared between copies, so passing tensors by
/// value is cheap. A tensor without a tape node takes part in forward
/// computation but never receives a gradient.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  std::span<const double> data() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double item() const;

  /// Shared handle to the payload; backward closures keep inputs alive through it.
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }

  Tape* tape() const { return tape_; }
  std::int64_t node() const { return node_; }
  bool on_tape() const { return tape_ != nullptr; }

  /// Same values, no tape node.
  Tensor detach() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::int64_t node_ = -1;
};

/// Backward closure of a recorded operation. `grad_in[i]` is empty when input
/// `i` needs no gradient; otherwise the closure adds its contribution into it.
using BackwardFn = std::function<void(std::span<const double> grad_out, std::span<const std::span<double>> grad_in)>;

/// Append-only record of operations for reverse-mode differentiation.
///
/// Nodes are appended in creation order, which is a topological order of the
/// graph, so backward walks them once in reverse. A tape is single-threaded;
/// independent tapes may run concurrently. Tensors referring to a tape must not
/// outlive it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a differentiable leaf.
  Tensor watch(const Tensor& value, std::string name = "leaf");

  /// Records an operation. When no input lives on a tape the result is a plain
  /// tensor and `backward` is dropped. Throws NumericError on non-finite output.
  static Tensor record(std::string_view op, Shape shape, std::vector<double> data,
                       std::initializer_list<const Tensor*> inputs, BackwardFn backward);
  static Tensor record(std::string_view op, Shape shape, std::vector<double> data,
                       std::span<const Tensor* const> inputs, BackwardFn backward);

  /// Propagates d(loss)/d(node) to every node reachable from the scalar `loss`.
  /// A second call without clear_gradients() throws TapeError.
  void backward(const Tensor& loss);

  /// Gradient of the last backward wrt a watched leaf, zeros when unreachable.
  std::vector<double> grad(const Tensor& leaf) const;
  Tensor grad_tensor(const Tensor& leaf) const;

  void clear_gradients();

  std::size_t num_nodes() const { return nodes_.size(); }
  /// Nodes processed by the last backward call.
  std::size_t visits() const { return visits_; }
  /// Per-node visit counters of the last backward call.
  const std::vector<std::uint32_t>& visit_counts() const { return visit_counts_; }

 private:
  struct Node {
    std::string op;
    std::size_t numel = 0;
    bool leaf = false;
    std::vector<std::int64_t> parents;
    BackwardFn backward;
  };

  std::int64_t append(Node node);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::uint32_t> visit_counts_;
  std::size_t visits_ = 0;
  bool backward_done_ = false;
};

}  // namespace augnet
