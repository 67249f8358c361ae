#include <vector>

#include "augnet/kernels.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace augnet;
using augnet::testing::max_abs_diff;
using augnet::testing::random_vector;

namespace {

void compare_conv(const ConvGeometry& g, std::uint64_t seed) {
  CAPTURE(seed);
  Rng rng(seed);
  const auto x = random_vector(rng, g.input_size());
  const auto w = random_vector(rng, g.weight_size());
  const auto b = random_vector(rng, g.out_channels);
  const auto go = random_vector(rng, g.output_size());

  std::vector<double> y_ref(g.output_size()), y_par(g.output_size());
  kernels::reference::conv_forward(g, x, w, b, y_ref);
  kernels::parallel::conv_forward(g, x, w, b, y_par);
  CHECK(max_abs_diff(y_ref, y_par) < 1e-12);

  std::vector<double> gx_ref(x.size(), 0.5), gw_ref(w.size(), 0.5), gb_ref(b.size(), 0.5);
  auto gx_par = gx_ref, gw_par = gw_ref, gb_par = gb_ref;
  kernels::reference::conv_backward(g, x, w, go, gx_ref, gw_ref, gb_ref);
  kernels::parallel::conv_backward(g, x, w, go, gx_par, gw_par, gb_par);
  CHECK(max_abs_diff(gx_ref, gx_par) < 1e-11);
  CHECK(max_abs_diff(gw_ref, gw_par) < 1e-10);
  CHECK(max_abs_diff(gb_ref, gb_par) < 1e-11);
}

}  // namespace

TEST_CASE("parallel convolution matches the serial reference") {
  ConvGeometry g;
  g.batch = 3;
  g.in_channels = 2;
  g.out_channels = 4;
  g.in_h = 7;
  g.in_w = 6;
  g.kernel_h = 3;
  g.kernel_w = 3;
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      g.stride = stride;
      g.pad_h = g.pad_w = pad;
      compare_conv(g, 10 * stride + pad);
    }
  }
  // 1-D layout and an even kernel.
  ConvGeometry g1;
  g1.batch = 5;
  g1.in_channels = 1;
  g1.out_channels = 2;
  g1.in_w = 33;
  g1.kernel_w = 4;
  g1.pad_w = 1;
  compare_conv(g1, 99);
  // Large enough to be split into several im2col chunks.
  ConvGeometry big;
  big.batch = 40;
  big.in_channels = 32;
  big.out_channels = 8;
  big.in_h = big.in_w = 16;
  big.kernel_h = big.kernel_w = 3;
  big.pad_h = big.pad_w = 1;
  compare_conv(big, 7);
}

TEST_CASE("parallel dense matches the serial reference") {
  Rng rng(4);
  const std::size_t batch = 7, in = 13, out = 5;
  const auto x = random_vector(rng, batch * in), w = random_vector(rng, out * in), b = random_vector(rng, out);
  const auto gy = random_vector(rng, batch * out);
  std::vector<double> y_ref(batch * out), y_par(batch * out);
  kernels::reference::dense_forward(batch, in, out, x, w, b, y_ref);
  kernels::parallel::dense_forward(batch, in, out, x, w, b, y_par);
  CHECK(max_abs_diff(y_ref, y_par) < 1e-12);

  std::vector<double> gx_ref(x.size(), 0.0), gw_ref(w.size(), 0.0), gb_ref(out, 0.0);
  auto gx_par = gx_ref, gw_par = gw_ref, gb_par = gb_ref;
  kernels::reference::dense_backward(batch, in, out, x, w, gy, gx_ref, gw_ref, gb_ref);
  kernels::parallel::dense_backward(batch, in, out, x, w, gy, gx_par, gw_par, gb_par);
  CHECK(max_abs_diff(gx_ref, gx_par) < 1e-12);
  CHECK(max_abs_diff(gw_ref, gw_par) < 1e-12);
  CHECK(max_abs_diff(gb_ref, gb_par) < 1e-12);
}

TEST_CASE("parallel max pooling matches the serial reference, including ties") {
  Rng rng(5);
  PoolGeometry g{6, 8, 8, 2, 2, 2};
  auto x = random_vector(rng, 6 * 64);
  for (std::size_t i = 0; i < x.size(); i += 3) x[i] = 0.25;  // plenty of ties
  const std::size_t n = g.planes * g.out_h() * g.out_w();
  std::vector<double> y_ref(n), y_par(n);
  std::vector<std::size_t> a_ref(n), a_par(n);
  kernels::reference::maxpool_forward(g, x, y_ref, a_ref);
  kernels::parallel::maxpool_forward(g, x, y_par, a_par);
  CHECK(y_ref == y_par);
  CHECK(a_ref == a_par);
}

TEST_CASE("geometry validation") {
  ConvGeometry g;
  g.in_w = 2;
  g.kernel_w = 3;
  CHECK_THROWS(g.validate());
  g.pad_w = 1;
  CHECK_NOTHROW(g.validate());
  g.stride = 0;
  CHECK_THROWS(g.validate());
  PoolGeometry p{1, 1, 3, 1, 4, 1};
  CHECK_THROWS(p.validate());
}
