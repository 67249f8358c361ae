#include <benchmark/benchmark.h>

#include <vector>

#include "augnet/kernels.hpp"
#include "augnet/rng.hpp"

using namespace augnet;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Shapes from the two trunks: a 1-D sinusoid layer and the second sprite block.
ConvGeometry geometry(int which, std::size_t batch) {
  ConvGeometry g;
  g.batch = batch;
  if (which == 0) {
    g.in_channels = 2;
    g.out_channels = 2;
    g.in_w = 1024;
    g.kernel_w = 3;
    g.pad_w = 1;
  } else {
    g.in_channels = 32;
    g.out_channels = 64;
    g.in_h = g.in_w = 32;
    g.kernel_h = g.kernel_w = 3;
    g.pad_h = g.pad_w = 1;
  }
  return g;
}

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  const auto g = geometry(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const auto x = filled(g.input_size(), 1), w = filled(g.weight_size(), 2), b = filled(g.out_channels, 3);
  std::vector<double> y(g.output_size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::conv_forward(g, x, w, b, y);
    } else {
      kernels::reference::conv_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.batch));
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  const auto g = geometry(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const auto x = filled(g.input_size(), 1), w = filled(g.weight_size(), 2), gy = filled(g.output_size(), 3);
  std::vector<double> gx(x.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::conv_backward(g, x, w, gy, gx, gw, gb);
    } else {
      kernels::reference::conv_backward(g, x, w, gy, gx, gw, gb);
    }
    benchmark::DoNotOptimize(gx.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.batch));
}

template <bool Parallel>
void dense(benchmark::State& state) {
  const std::size_t batch = 128, in = 256, out = 64;
  const auto x = filled(batch * in, 1), w = filled(out * in, 2), b = filled(out, 3);
  std::vector<double> y(batch * out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::dense_forward(batch, in, out, x, w, b, y);
    } else {
      kernels::reference::dense_forward(batch, in, out, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(conv_forward<false>)->Args({0, 32})->Args({1, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(conv_forward<true>)->Args({0, 32})->Args({1, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<false>)->Args({0, 32})->Args({1, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<true>)->Args({0, 32})->Args({1, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(dense<false>)->Unit(benchmark::kMicrosecond);
BENCHMARK(dense<true>)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
