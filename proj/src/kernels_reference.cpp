#include "augnet/error.hpp"
#include "augnet/kernels.hpp"

namespace augnet {

void ConvGeometry::validate() const {
  if (stride == 0) throw ShapeError("convolution stride must be positive");
  if (kernel_h == 0 || kernel_w == 0) throw ShapeError("convolution kernel must be non-empty");
  if (kernel_h > in_h + 2 * pad_h || kernel_w > in_w + 2 * pad_w) {
    throw ShapeError("convolution kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                     " larger than padded input " + std::to_string(in_h + 2 * pad_h) + "x" +
                     std::to_string(in_w + 2 * pad_w));
  }
}

void PoolGeometry::validate() const {
  if (stride == 0 || size_h == 0 || size_w == 0) throw ShapeError("pool size and stride must be positive");
  if (size_h > in_h || size_w > in_w) throw ShapeError("pool window larger than input");
}

namespace kernels::reference {

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> output) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_h);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_w);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                acc += weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] *
                       input[((b * g.in_channels + ci) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                             static_cast<std::size_t>(ix)];
              }
            }
          }
          output[((b * g.out_channels + co) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                   std::span<const double> grad_output, std::span<double> grad_input, std::span<double> grad_weight,
                   std::span<double> grad_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_output[((b * g.out_channels + co) * oh + oy) * ow + ox];
          if (!grad_bias.empty()) grad_bias[co] += go;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_h);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_w);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                const std::size_t wi = ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
                const std::size_t ii = ((b * g.in_channels + ci) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                       static_cast<std::size_t>(ix);
                if (!grad_weight.empty()) grad_weight[wi] += go * input[ii];
                if (!grad_input.empty()) grad_input[ii] += go * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias, std::span<double> y) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[b * in + i] * weight[o * in + i];
      y[b * out + o] = acc;
    }
  }
}

void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> grad_y, std::span<double> grad_x,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      const double gy = grad_y[b * out + o];
      if (!grad_bias.empty()) grad_bias[o] += gy;
      for (std::size_t i = 0; i < in; ++i) {
        if (!grad_x.empty()) grad_x[b * in + i] += gy * weight[o * in + i];
        if (!grad_weight.empty()) grad_weight[o * in + i] += gy * x[b * in + i];
      }
    }
  }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                     std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t p = 0; p < g.planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (p * g.in_h + oy * g.stride) * g.in_w + ox * g.stride;
        for (std::size_t ky = 0; ky < g.size_h; ++ky) {
          for (std::size_t kx = 0; kx < g.size_w; ++kx) {
            const std::size_t idx = (p * g.in_h + oy * g.stride + ky) * g.in_w + ox * g.stride + kx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        output[o] = input[best];
        argmax[o] = best;
      }
    }
  }
}

}  // namespace kernels::reference
}  // namespace augnet
