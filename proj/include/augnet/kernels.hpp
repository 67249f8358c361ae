#pragma once

#include <cstddef>
#include <span>

// Raw compute kernels behind the differentiable layers, in two flavours:
//
//   kernels::reference  serial direct loops, kept as the test oracle
//   kernels::parallel   OpenMP over the batch, im2col + Eigen GEMM for
//                       convolutions and dense layers
//
// All tensors are row-major NCHW; 1-D convolutions use in_h = kernel_h = 1.
// Backward kernels accumulate (+=) into the gradient buffers they are given;
// an empty span skips that gradient.

namespace augnet {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;

  std::size_t out_h() const { return (in_h + 2 * pad_h - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad_w - kernel_w) / stride + 1; }
  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_channels * out_h() * out_w(); }
  /// Throws ShapeError when the kernel does not fit the padded input.
  void validate() const;
};

struct PoolGeometry {
  std::size_t planes = 1;  // batch * channels
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t size_h = 1;
  std::size_t size_w = 1;
  std::size_t stride = 1;

  std::size_t out_h() const { return (in_h - size_h) / stride + 1; }
  std::size_t out_w() const { return (in_w - size_w) / stride + 1; }
  void validate() const;
};

namespace kernels::reference {

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> output);
void conv_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                   std::span<const double> grad_output, std::span<double> grad_input, std::span<double> grad_weight,
                   std::span<double> grad_bias);

/// y(batch, out) = x(batch, in) * W(out, in)^T + b(out)
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias, std::span<double> y);
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> grad_y, std::span<double> grad_x,
                    std::span<double> grad_weight, std::span<double> grad_bias);

/// Max pooling; `argmax` receives the flat input index of every output (lowest index wins ties).
void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                     std::span<std::size_t> argmax);

}  // namespace kernels::reference

namespace kernels::parallel {

void conv_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                  std::span<const double> bias, std::span<double> output);
void conv_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                   std::span<const double> grad_output, std::span<double> grad_input, std::span<double> grad_weight,
                   std::span<double> grad_bias);
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                   std::span<const double> weight, std::span<const double> bias, std::span<double> y);
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> weight, std::span<const double> grad_y, std::span<double> grad_x,
                    std::span<double> grad_weight, std::span<double> grad_bias);
void maxpool_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                     std::span<std::size_t> argmax);

/// Threads OpenMP will use for the parallel kernels (1 when built without OpenMP).
int max_threads();

}  // namespace kernels::parallel

}  // namespace augnet
