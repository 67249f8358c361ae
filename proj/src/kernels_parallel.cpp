#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "augnet/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace augnet::kernels::parallel {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

MapC view(const double* p, std::size_t rows, std::size_t cols) {
  return MapC(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
Map view(double* p, std::size_t rows, std::size_t cols) {
  return Map(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Upper bound on the im2col scratch per thread, in doubles (16 MiB).
constexpr std::size_t kColumnBudget = std::size_t{1} << 21;

std::size_t chunk_size(const ConvGeometry& g) {
  const std::size_t per_sample = g.in_channels * g.kernel_h * g.kernel_w * g.out_h() * g.out_w();
  return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_sample, 1), 1, g.batch);
}

// Unfolds samples [b0, b0 + n) into col(K, n * P), K = Cin*kh*kw, P = oh*ow.
void im2col(const ConvGeometry& g, std::span<const double> input, std::size_t b0, std::size_t n, double* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), P = oh * ow, NP = n * P;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        double* row = col + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * NP;
        for (std::size_t s = 0; s < n; ++s) {
          const double* plane = input.data() + ((b0 + s) * g.in_channels + ci) * g.in_h * g.in_w;
          double* dst = row + s * P;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_h);
            double* out_row = dst + oy * ow;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
              std::fill_n(out_row, ow, 0.0);
              continue;
            }
            const double* in_row = plane + static_cast<std::size_t>(iy) * g.in_w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_w);
              out_row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) ? 0.0 : in_row[ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* col, std::size_t b0, std::size_t n, std::span<double> grad_input) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), P = oh * ow, NP = n * P;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const double* row = col + ((ci * g.kernel_h + ky) * g.kernel_w + kx) * NP;
        for (std::size_t s = 0; s < n; ++s) {
          double* plane = grad_input.data() + ((b0 + s) * g.in_channels + ci) * g.in_h * g.in_w;
          const double* src = row + s * P;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_h);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            double* in_row = plane + static_cast<std::size_t>(iy) * g.in_w;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_w);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in_w)) in_row[ix] += src[oy * ow + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> output) {
  const std::size_t K = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t P = g.out_h() * g.out_w();
  const std::size_t chunk = chunk_size(g);
  const auto chunks = static_cast<std::ptrdiff_t>((g.batch + chunk - 1) / chunk);

#pragma omp parallel
  {
    std::vector<double> col(K * chunk * P);
    std::vector<double> tmp(g.out_channels * chunk * P);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
      const std::size_t b0 = static_cast<std::size_t>(c) * chunk;
      const std::size_t n = std::min(chunk, g.batch - b0);
      const std::size_t NP = n * P;
      im2col(g, input, b0, n, col.data());
      view(tmp.data(), g.out_channels, NP).noalias() = view(weight.data(), g.out_channels, K) * view(col.data(), K, NP);
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const double b = bias.empty() ? 0.0 : bias[co];
          const double* src = tmp.data() + co * NP + s * P;
          double* dst = output.data() + ((b0 + s) * g.out_channels + co) * P;
          for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + b;
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                   std::span<const double> grad_output, std::span<double> grad_input, std::span<double> grad_weight,
                   std::span<double> grad_bias) {
  const std::size_t K = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t P = g.out_h() * g.out_w();
  const std::size_t chunk = chunk_size(g);
  const auto chunks = static_cast<std::ptrdiff_t>((g.batch + chunk - 1) / chunk);

  if (!grad_bias.empty()) {
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const double* src = grad_output.data() + (b * g.out_channels + co) * P;
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += src[p];
        grad_bias[co] += s;
      }
    }
  }
  if (grad_input.empty() && grad_weight.empty()) return;

#pragma omp parallel
  {
    std::vector<double> col(K * chunk * P);
    std::vector<double> gout(g.out_channels * chunk * P);
    std::vector<double> local_gw(grad_weight.empty() ? 0 : grad_weight.size(), 0.0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
      const std::size_t b0 = static_cast<std::size_t>(c) * chunk;
      const std::size_t n = std::min(chunk, g.batch - b0);
      const std::size_t NP = n * P;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const double* src = grad_output.data() + ((b0 + s) * g.out_channels + co) * P;
          std::copy_n(src, P, gout.data() + co * NP + s * P);
        }
      }
      if (!grad_weight.empty()) {
        im2col(g, input, b0, n, col.data());
        view(local_gw.data(), g.out_channels, K).noalias() +=
            view(gout.data(), g.out_channels, NP) * view(col.data(), K, NP).transpose();
      }
      if (!grad_input.empty()) {
        view(col.data(), K, NP).noalias() =
            view(weight.data(), g.out_channels, K).transpose() * view(gout.data(), g.out_channels, NP);
        col2im(g, col.data(), b0, n, grad_input);
      }
    }
    if (!grad_weight.empty()) {
#pragma omp critical
      for (std::size_t i = 0; i < local_gw.size(); ++i) grad_weight[i] += local_gw[i];
    }
  }
}

void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias, std::span<double> y) {
  view(y.data(), batch, out).noalias() = view(x.data(), batch, in) * view(weight.data(), out, in).transpose();
  if (bias.empty()) return;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(batch); ++b) {
    for (std::size_t o = 0; o < out; ++o) y[static_cast<std::size_t>(b) * out + o] += bias[o];
  }
}

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> grad_y, std::span<double> grad_x,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
  if (!grad_x.empty()) {
    view(grad_x.data(), batch, in).noalias() += view(grad_y.data(), batch, out) * view(weight.data(), out, in);
  }
  if (!grad_weight.empty()) {
    view(grad_weight.data(), out, in).noalias() += view(grad_y.data(), batch, out).transpose() * view(x.data(), batch, in);
  }
  if (!grad_bias.empty()) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out; ++o) grad_bias[o] += grad_y[b * out + o];
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                     std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(g.planes); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (p * g.in_h + oy * g.stride) * g.in_w + ox * g.stride;
        double best_value = input[best];
        for (std::size_t ky = 0; ky < g.size_h; ++ky) {
          const std::size_t base = (p * g.in_h + oy * g.stride + ky) * g.in_w + ox * g.stride;
          for (std::size_t kx = 0; kx < g.size_w; ++kx) {
            if (input[base + kx] > best_value) {
              best = base + kx;
              best_value = input[best];
            }
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        output[o] = best_value;
        argmax[o] = best;
      }
    }
  }
}

}  // namespace augnet::kernels::parallel
