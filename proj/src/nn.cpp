#include "augnet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "augnet/error.hpp"
#include "augnet/kernels.hpp"

namespace augnet {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

Tensor conv_impl(const char* op, const Tensor& x, const Tensor& weight, const Tensor& bias, ConvGeometry g,
                 Shape out_shape) {
  g.validate();
  std::vector<double> out(g.output_size());
  kernels::parallel::conv_forward(g, x.data(), weight.data(), bias.data(), out);
  return Tape::record(op, std::move(out_shape), std::move(out), {&x, &weight, &bias},
                      [g, sx = x.storage(), sw = weight.storage()](auto gout, auto gin) {
                        kernels::parallel::conv_backward(g, *sx, *sw, gout, gin[0], gin[1], gin[2]);
                      });
}

Tensor maxpool_impl(const char* op, const Tensor& x, PoolGeometry g, Shape out_shape) {
  g.validate();
  const std::size_t n = numel(out_shape);
  std::vector<double> out(n);
  auto argmax = std::make_shared<std::vector<std::size_t>>(n);
  kernels::parallel::maxpool_forward(g, x.data(), out, *argmax);
  return Tape::record(op, std::move(out_shape), std::move(out), {&x}, [argmax](auto gout, auto gin) {
    const auto& idx = *argmax;
    for (std::size_t i = 0; i < idx.size(); ++i) gin[0][idx[i]] += gout[i];
  });
}

}  // namespace

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && bias.rank() == 1, "dense: expects x(B, in), W(out, in), b(out)");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  require(weight.dim(1) == in && bias.dim(0) == out,
          "dense: incompatible shapes x" + to_string(x.shape()) + " W" + to_string(weight.shape()) + " b" +
              to_string(bias.shape()));
  std::vector<double> y(batch * out);
  kernels::parallel::dense_forward(batch, in, out, x.data(), weight.data(), bias.data(), y);
  return Tape::record("dense", Shape{batch, out}, std::move(y), {&x, &weight, &bias},
                      [batch, in, out, sx = x.storage(), sw = weight.storage()](auto gout, auto gin) {
                        kernels::parallel::dense_backward(batch, in, out, *sx, *sw, gout, gin[0], gin[1], gin[2]);
                      });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require(x.rank() == 3 && weight.rank() == 3 && bias.rank() == 1, "conv1d: expects x(B, C, L), W(Co, C, K), b(Co)");
  require(weight.dim(1) == x.dim(1) && bias.dim(0) == weight.dim(0),
          "conv1d: incompatible shapes x" + to_string(x.shape()) + " W" + to_string(weight.shape()));
  ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.out_channels = weight.dim(0);
  g.in_w = x.dim(2);
  g.kernel_w = weight.dim(2);
  g.stride = stride;
  g.pad_w = padding;
  g.validate();
  return conv_impl("conv1d", x, weight, bias, g, Shape{g.batch, g.out_channels, g.out_w()});
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  require(x.rank() == 4 && weight.rank() == 4 && bias.rank() == 1,
          "conv2d: expects x(B, C, H, W), W(Co, C, Kh, Kw), b(Co)");
  require(weight.dim(1) == x.dim(1) && bias.dim(0) == weight.dim(0),
          "conv2d: incompatible shapes x" + to_string(x.shape()) + " W" + to_string(weight.shape()));
  ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.out_channels = weight.dim(0);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = stride;
  g.pad_h = padding;
  g.pad_w = padding;
  g.validate();
  return conv_impl("conv2d", x, weight, bias, g, Shape{g.batch, g.out_channels, g.out_h(), g.out_w()});
}

Tensor maxpool1d(const Tensor& x, std::size_t size, std::size_t stride) {
  require(x.rank() == 3, "maxpool1d: expects x(B, C, L)");
  PoolGeometry g{x.dim(0) * x.dim(1), 1, x.dim(2), 1, size, stride};
  g.validate();
  return maxpool_impl("maxpool1d", x, g, Shape{x.dim(0), x.dim(1), g.out_w()});
}

Tensor maxpool2d(const Tensor& x, std::size_t size, std::size_t stride) {
  require(x.rank() == 4, "maxpool2d: expects x(B, C, H, W)");
  PoolGeometry g{x.dim(0) * x.dim(1), x.dim(2), x.dim(3), size, size, stride};
  g.validate();
  return maxpool_impl("maxpool2d", x, g, Shape{x.dim(0), x.dim(1), g.out_h(), g.out_w()});
}

Tensor global_mean_pool(const Tensor& x) {
  require(x.rank() >= 3, "global_mean_pool: expects x(B, C, ...)");
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t area = x.size() / planes;
  std::vector<double> out(planes, 0.0);
  const auto in = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += in[p * area + i];
    out[p] = s / static_cast<double>(area);
  }
  return Tape::record("global_mean_pool", Shape{x.dim(0), x.dim(1)}, std::move(out), {&x},
                      [planes, area](auto gout, auto gin) {
                        const double inv = 1.0 / static_cast<double>(area);
                        for (std::size_t p = 0; p < planes; ++p) {
                          for (std::size_t i = 0; i < area; ++i) gin[0][p * area + i] += gout[p] * inv;
                        }
                      });
}

Tensor flatten(const Tensor& x) {
  require(x.rank() >= 1, "flatten: scalar operand");
  const std::size_t b = x.dim(0);
  const std::size_t rest = b ? x.size() / b : 0;
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tape::record("flatten", Shape{b, rest}, std::move(out), {&x}, [](auto gout, auto gin) {
    for (std::size_t i = 0; i < gout.size(); ++i) gin[0][i] += gout[i];
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, RunningStats& stats, Mode mode,
                  double momentum, double eps) {
  if (!(eps > 0.0)) throw ConfigError("batch_norm: eps must be positive");
  require(x.rank() >= 2, "batch_norm: expects x(B, C, ...)");
  const std::size_t B = x.dim(0), C = x.dim(1);
  const std::size_t area = (B && C) ? x.size() / (B * C) : 0;
  require(gamma.size() == C && beta.size() == C, "batch_norm: gamma/beta must have one entry per channel");
  require(B >= 1, "batch_norm: empty batch");
  if (stats.mean.size() != C) stats = RunningStats(C);

  const auto in = x.data();
  const std::size_t count = B * area;
  std::vector<double> mu(C), inv_std(C);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = in.data() + (b * C + c) * area;
        for (std::size_t i = 0; i < area; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = in.data() + (b * C + c) * area;
        for (std::size_t i = 0; i < area; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / static_cast<double>(count);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * m;
      stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = stats.mean[c];
      inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  const auto g = gamma.data(), bt = beta.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (b * C + c) * area;
      for (std::size_t i = 0; i < area; ++i) {
        const double h = (in[off + i] - mu[c]) * inv_std[c];
        (*xhat)[off + i] = h;
        out[off + i] = g[c] * h + bt[c];
      }
    }
  }

  const bool train = mode == Mode::train;
  return Tape::record(
      "batch_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
      [B, C, area, count, train, xhat, inv_std = std::move(inv_std), sg = gamma.storage()](auto gout, auto gin) {
        const auto& h = *xhat;
        const auto& gm = *sg;
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gh = 0.0;
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t off = (b * C + c) * area;
            for (std::size_t i = 0; i < area; ++i) {
              sum_g += gout[off + i];
              sum_gh += gout[off + i] * h[off + i];
            }
          }
          if (!gin[1].empty()) gin[1][c] += sum_gh;
          if (!gin[2].empty()) gin[2][c] += sum_g;
          if (gin[0].empty()) continue;
          const double k = gm[c] * inv_std[c];
          const double mg = sum_g / static_cast<double>(count);
          const double mgh = sum_gh / static_cast<double>(count);
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t off = (b * C + c) * area;
            for (std::size_t i = 0; i < area; ++i) {
              gin[0][off + i] += train ? k * (gout[off + i] - mg - h[off + i] * mgh) : k * gout[off + i];
            }
          }
        }
      });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be (batch, classes)");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  require(labels.size() == B, "softmax_cross_entropy: label count mismatch");
  require(B > 0 && K > 0, "softmax_cross_entropy: empty logits");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw ConfigError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                        std::to_string(K) + ")");
    }
  }
  const auto z = logits.data();
  auto probs = std::make_shared<std::vector<double>>(B * K);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = z.data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(row[k] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < K; ++k) (*probs)[b * K + k] = std::exp(row[k] - lse);
    loss += lse - row[labels[b]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> y(labels.begin(), labels.end());
  return Tape::record("softmax_cross_entropy", Shape{}, {loss}, {&logits},
                      [B, K, probs, y = std::move(y)](auto gout, auto gin) {
                        const double s = gout[0] / static_cast<double>(B);
                        for (std::size_t b = 0; b < B; ++b) {
                          for (std::size_t k = 0; k < K; ++k) {
                            const double onehot = static_cast<std::size_t>(y[b]) == k ? 1.0 : 0.0;
                            gin[0][b * K + k] += s * ((*probs)[b * K + k] - onehot);
                          }
                        }
                      });
}

}  // namespace augnet
