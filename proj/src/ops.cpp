#include "augnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "augnet/error.hpp"

namespace augnet {
namespace {

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.size() == 1) return Broadcast::right_scalar;
  if (a.size() == 1) return Broadcast::left_scalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

// Accumulates g into a gradient buffer that may be a broadcast scalar.
void accumulate(std::span<double> dst, std::span<const double> g, double factor = 1.0) {
  if (dst.empty()) return;
  if (dst.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
  } else {
    double s = 0.0;
    for (double v : g) s += v;
    dst[0] += factor * s;
  }
}

template <class F>
Tensor unary(const char* op, const Tensor& x, F&& value, BackwardFn backward) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(in[i]);
  return Tape::record(op, x.shape(), std::move(out), {&x}, std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const auto mode = check_binary("add", a, b);
  const Shape shape = mode == Broadcast::left_scalar ? b.shape() : a.shape();
  std::vector<double> out(numel(shape));
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = da[mode == Broadcast::left_scalar ? 0 : i] + db[mode == Broadcast::right_scalar ? 0 : i];
  }
  return Tape::record("add", shape, std::move(out), {&a, &b}, [](auto g, auto gin) {
    accumulate(gin[0], g);
    accumulate(gin[1], g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto mode = check_binary("sub", a, b);
  const Shape shape = mode == Broadcast::left_scalar ? b.shape() : a.shape();
  std::vector<double> out(numel(shape));
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = da[mode == Broadcast::left_scalar ? 0 : i] - db[mode == Broadcast::right_scalar ? 0 : i];
  }
  return Tape::record("sub", shape, std::move(out), {&a, &b}, [](auto g, auto gin) {
    accumulate(gin[0], g);
    accumulate(gin[1], g, -1.0);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto mode = check_binary("mul", a, b);
  const Shape shape = mode == Broadcast::left_scalar ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  std::vector<double> out(n);
  const auto da = a.data(), db = b.data();
  const bool ls = mode == Broadcast::left_scalar, rs = mode == Broadcast::right_scalar;
  for (std::size_t i = 0; i < n; ++i) out[i] = da[ls ? 0 : i] * db[rs ? 0 : i];
  return Tape::record("mul", shape, std::move(out), {&a, &b},
                      [sa = a.storage(), sb = b.storage(), ls, rs, n](auto g, auto gin) {
                        const auto& va = *sa;
                        const auto& vb = *sb;
                        if (!gin[0].empty()) {
                          if (ls) {
                            double s = 0.0;
                            for (std::size_t i = 0; i < n; ++i) s += g[i] * vb[i];
                            gin[0][0] += s;
                          } else {
                            for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[i] * vb[rs ? 0 : i];
                          }
                        }
                        if (!gin[1].empty()) {
                          if (rs) {
                            double s = 0.0;
                            for (std::size_t i = 0; i < n; ++i) s += g[i] * va[i];
                            gin[1][0] += s;
                          } else {
                            for (std::size_t i = 0; i < n; ++i) gin[1][i] += g[i] * va[ls ? 0 : i];
                          }
                        }
                      });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return factor * v; },
               [factor](auto g, auto gin) { accumulate(gin[0], g, factor); });
}

Tensor add_constant(const Tensor& x, double value) {
  return unary("add_constant", x, [value](double v) { return v + value; },
               [](auto g, auto gin) { accumulate(gin[0], g); });
}

Tensor negate(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [sx = x.storage()](auto g, auto gin) {
    const auto& v = *sx;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (v[i] > 0.0) gin[0][i] += g[i];
    }
  });
}

Tensor exp(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x[i]);
  auto shared = std::make_shared<std::vector<double>>(out);
  return Tape::record("exp", x.shape(), std::move(out), {&x}, [shared](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * (*shared)[i];
  });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0) && x.on_tape()) throw NumericError("log: operand must be strictly positive");
  }
  return unary("log", x, [](double v) { return std::log(v); }, [sx = x.storage()](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] / (*sx)[i];
  });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0 || (v == 0.0 && x.on_tape())) throw NumericError("sqrt: operand must be strictly positive");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x[i]);
  auto shared = std::make_shared<std::vector<double>>(out);
  return Tape::record("sqrt", x.shape(), std::move(out), {&x}, [shared](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * 0.5 / (*shared)[i];
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ConfigError("clamp: lo > hi");
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [sx = x.storage(), lo, hi](auto g, auto gin) {
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   const double v = (*sx)[i];
                   if (v > lo && v < hi) gin[0][i] += g[i];
                 }
               });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [sx = x.storage()](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += 2.0 * (*sx)[i] * g[i];
  });
}

namespace {

// Neumaier summation: the scalar reductions feed finite-difference checks, so their round-off matters.
struct CompensatedSum {
  double total = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = total + v;
    carry += std::abs(total) >= std::abs(v) ? (total - t) + v : (v - t) + total;
    total = t;
  }
  double value() const { return total + carry; }
};

}  // namespace

Tensor sum(const Tensor& x) {
  CompensatedSum s;
  for (double v : x.data()) s.add(v);
  return Tape::record("sum", Shape{}, {s.value()}, {&x}, [](auto g, auto gin) {
    for (auto& v : gin[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.size()) throw ShapeError("weighted_sum: weight count mismatch");
  CompensatedSum s;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double p = weights[i] * x[i];
    s.add(p);
    s.add(std::fma(weights[i], x[i], -p));  // exact product residual
  }
  std::vector<double> w(weights.begin(), weights.end());
  return Tape::record("weighted_sum", Shape{}, {s.value()}, {&x}, [w = std::move(w)](auto g, auto gin) {
    for (std::size_t i = 0; i < w.size(); ++i) gin[0][i] += g[0] * w[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tape::record("reshape", std::move(shape), std::move(out), {&x}, [](auto g, auto gin) { accumulate(gin[0], g); });
}

Tensor pick(const Tensor& x, std::size_t i) {
  if (i >= x.size()) throw ShapeError("pick: index out of range");
  return Tape::record("pick", Shape{}, {x[i]}, {&x}, [i](auto g, auto gin) { gin[0][i] += g[0]; });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 || x.size() == 0) throw ShapeError("softmax: expects a non-empty 1-D tensor");
  const auto in = x.data();
  const double mx = *std::max_element(in.begin(), in.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) z += (out[i] = std::exp(in[i] - mx));
  for (auto& v : out) v /= z;
  auto shared = std::make_shared<std::vector<double>>(out);
  return Tape::record("softmax", x.shape(), std::move(out), {&x}, [shared](auto g, auto gin) {
    const auto& p = *shared;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
    for (std::size_t i = 0; i < p.size(); ++i) gin[0][i] += p[i] * (g[i] - dot);
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Shape shape = parts[0].shape();
  if (shape.empty()) throw ShapeError("concat: scalar operand");
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat: trailing dimensions differ: " + to_string(shape) + " vs " + to_string(p.shape()));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<double> out;
  out.reserve(numel(shape));
  std::vector<const Tensor*> inputs;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(&p);
  }
  return Tape::record("concat", shape, std::move(out), inputs, [offsets](auto g, auto gin) {
    for (std::size_t k = 0; k < gin.size(); ++k) {
      auto dst = gin[k];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[offsets[k] + i];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) throw ShapeError("slice_rows: invalid range");
  Shape shape = x.shape();
  const std::size_t row = numel(shape) / std::max<std::size_t>(shape[0], 1);
  shape[0] = end - begin;
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * row));
  return Tape::record("slice_rows", shape, std::move(out), {&x}, [off = begin * row](auto g, auto gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][off + i] += g[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() == 0) throw ShapeError("gather_rows: scalar operand");
  Shape shape = x.shape();
  const std::size_t row = x.dim(0) ? x.size() / x.dim(0) : 0;
  for (auto i : indices) {
    if (i >= x.dim(0)) throw ShapeError("gather_rows: index out of range");
  }
  shape[0] = indices.size();
  std::vector<double> out(indices.size() * row);
  const auto in = x.data();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(indices[r] * row), row, out.begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tape::record("gather_rows", shape, std::move(out), {&x}, [idx = std::move(idx), row](auto g, auto gin) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < row; ++j) gin[0][idx[r] * row + j] += g[r * row + j];
    }
  });
}

Tensor tile_rows(const Tensor& x, std::size_t times) {
  if (x.rank() == 0 || times == 0) throw ShapeError("tile_rows: invalid operand");
  Shape shape = x.shape();
  shape[0] *= times;
  std::vector<double> out;
  out.reserve(x.size() * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), x.data().begin(), x.data().end());
  return Tape::record("tile_rows", shape, std::move(out), {&x}, [times](auto g, auto gin) {
    const std::size_t n = gin[0].size();
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t i = 0; i < n; ++i) gin[0][i] += g[t * n + i];
    }
  });
}

Tensor mean_of_groups(const Tensor& x, std::size_t groups) {
  if (x.rank() == 0 || groups == 0 || x.dim(0) % groups != 0) throw ShapeError("mean_of_groups: rows not divisible by groups");
  Shape shape = x.shape();
  shape[0] /= groups;
  const std::size_t n = numel(shape);
  std::vector<double> out(n, 0.0);
  const auto in = x.data();
  const double inv = 1.0 / static_cast<double>(groups);
  for (std::size_t t = 0; t < groups; ++t) {
    for (std::size_t i = 0; i < n; ++i) out[i] += in[t * n + i];
  }
  for (auto& v : out) v *= inv;
  return Tape::record("mean_of_groups", shape, std::move(out), {&x}, [groups, n, inv](auto g, auto gin) {
    for (std::size_t t = 0; t < groups; ++t) {
      for (std::size_t i = 0; i < n; ++i) gin[0][t * n + i] += g[i] * inv;
    }
  });
}

}  // namespace augnet
