#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "augnet/tensor.hpp"

namespace augnet::fft {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place iterative radix-2 transform, X_k = sum_t x_t e^{-2 pi i k t / n}.
/// `inverse` flips the exponent sign and divides by n. Length must be a power of two.
void transform(std::span<Complex> a, bool inverse);

/// Non-redundant half spectrum: bins 0..n/2 of the transform of a real signal.
std::vector<Complex> rfft(std::span<const double> x);

/// Real signal of length n whose half spectrum is `spectrum`; imaginary parts of
/// the DC and Nyquist bins are ignored. Throws ShapeError unless spectrum.size() == n/2 + 1.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

/// Hilbert transform H(x) such that x + i H(x) is the analytic signal
/// (negative frequencies zeroed, DC and Nyquist kept once).
std::vector<double> hilbert(std::span<const double> x);

/// O(n^2) transform for testing.
std::vector<Complex> naive_dft(std::span<const Complex> x);

// Differentiable versions over the last axis. The half spectrum is stored as a
// trailing (n/2 + 1, 2) block of (re, im) pairs.

/// (..., n) -> (..., n/2 + 1, 2)
Tensor rfft(const Tensor& x);
/// (..., n/2 + 1, 2) -> (..., n)
Tensor irfft(const Tensor& spectrum, std::size_t n);

}  // namespace augnet::fft
