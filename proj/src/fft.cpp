#include "augnet/fft.hpp"

#include <cmath>
#include <numbers>

#include "augnet/error.hpp"

namespace augnet::fft {

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

void transform(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ShapeError("fft: length " + std::to_string(n) + " is not a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  // Twiddles are evaluated directly rather than by recurrence to keep round-off at O(eps log n).
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = Complex(std::cos(angle), std::sin(angle));
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2, step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * twiddle[k * step];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

std::vector<Complex> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw ShapeError("rfft: length must be at least 2");
  std::vector<Complex> a(x.begin(), x.end());
  transform(a, false);
  a.resize(n / 2 + 1);
  return a;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  if (n < 2 || spectrum.size() != n / 2 + 1) {
    throw ShapeError("irfft: spectrum of " + std::to_string(spectrum.size()) + " bins does not match length " +
                     std::to_string(n));
  }
  std::vector<Complex> a(n);
  a[0] = Complex(spectrum[0].real(), 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) {
    a[k] = spectrum[k];
    a[n - k] = std::conj(spectrum[k]);
  }
  a[n / 2] = Complex(spectrum[n / 2].real(), 0.0);
  transform(a, true);
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = a[t].real();
  return out;
}

std::vector<double> hilbert(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Complex> a(x.begin(), x.end());
  transform(a, false);
  // Multiply by -i sign(k); DC and Nyquist vanish.
  a[0] = 0.0;
  if (n % 2 == 0) a[n / 2] = 0.0;
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) {
    a[k] *= Complex(0.0, -1.0);
    a[n - k] *= Complex(0.0, 1.0);
  }
  transform(a, true);
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = a[t].real();
  return out;
}

std::vector<Complex> naive_dft(std::span<const Complex> x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

Tensor rfft(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("rfft: scalar operand");
  const std::size_t n = x.shape().back();
  if (n < 2 || !is_power_of_two(n)) throw ShapeError("rfft: last axis length must be a power of two >= 2");
  const std::size_t rows = x.size() / n, m = n / 2 + 1;
  Shape shape = x.shape();
  shape.back() = m;
  shape.push_back(2);
  std::vector<double> out(rows * m * 2);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto spec = rfft(x.data().subspan(r * n, n));
    for (std::size_t k = 0; k < m; ++k) {
      out[(r * m + k) * 2] = spec[k].real();
      out[(r * m + k) * 2 + 1] = spec[k].imag();
    }
  }
  // Adjoint: dL/dx_t = Re sum_{k<=n/2} G_k e^{+2 pi i k t / n}.
  return Tape::record("rfft", std::move(shape), std::move(out), {&x}, [rows, n, m](auto gout, auto gin) {
    std::vector<Complex> a(n);
    for (std::size_t r = 0; r < rows; ++r) {
      std::fill(a.begin(), a.end(), Complex(0.0));
      for (std::size_t k = 0; k < m; ++k) a[k] = Complex(gout[(r * m + k) * 2], gout[(r * m + k) * 2 + 1]);
      transform(a, true);
      for (std::size_t t = 0; t < n; ++t) gin[0][r * n + t] += a[t].real() * static_cast<double>(n);
    }
  });
}

Tensor irfft(const Tensor& spectrum, std::size_t n) {
  if (spectrum.rank() < 2 || spectrum.shape().back() != 2) throw ShapeError("irfft: expects (..., bins, 2)");
  const std::size_t m = spectrum.shape()[spectrum.rank() - 2];
  if (n < 2 || m != n / 2 + 1) {
    throw ShapeError("irfft: " + std::to_string(m) + " bins do not match signal length " + std::to_string(n));
  }
  if (!is_power_of_two(n)) throw ShapeError("irfft: length must be a power of two");
  const std::size_t rows = spectrum.size() / (2 * m);
  Shape shape(spectrum.shape().begin(), spectrum.shape().end() - 1);
  shape.back() = n;
  std::vector<double> out(rows * n);
  std::vector<Complex> spec(m);
  const auto in = spectrum.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < m; ++k) spec[k] = Complex(in[(r * m + k) * 2], in[(r * m + k) * 2 + 1]);
    const auto sig = irfft(spec, n);
    std::copy(sig.begin(), sig.end(), out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  // Adjoint: dL/dY_k = (c_k / n) rfft(g)_k with c_k = 1 at DC/Nyquist, 2 elsewhere;
  // the ignored imaginary parts of DC and Nyquist get zero gradient.
  return Tape::record("irfft", std::move(shape), std::move(out), {&spectrum}, [rows, n, m](auto gout, auto gin) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto g = rfft(gout.subspan(r * n, n));
      for (std::size_t k = 0; k < m; ++k) {
        const double c = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        gin[0][(r * m + k) * 2] += c / static_cast<double>(n) * g[k].real();
        if (k != 0 && k != n / 2) gin[0][(r * m + k) * 2 + 1] += c / static_cast<double>(n) * g[k].imag();
      }
    }
  });
}

}  // namespace augnet::fft
