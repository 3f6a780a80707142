#pragma once

#include <complex>
#include <cstddef>
#include <vector>

// In-tree radix-2 FFT. Rendering must be bit-deterministic with a fixed
// summation order, so convolution stays on this pinned implementation
// rather than an external planner-driven library.

namespace convoforge {

inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1 : -1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Full linear convolution, length |a| + |b| - 1. Short kernels fall back to
// the direct form; both paths are deterministic.
inline std::vector<double> convolve(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  if (a.size() < 64 || b.size() < 64) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ai = a[i];
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
    }
    return out;
  }
  const std::size_t n = next_pow2(out_len);
  // Pack both real signals into one complex transform.
  std::vector<std::complex<double>> fab(n, {0.0, 0.0});
  for (std::size_t i = 0; i < a.size(); ++i) fab[i].real(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) fab[i].imag(b[i]);
  fft_inplace(fab, false);
  std::vector<std::complex<double>> prod(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kc = (n - k) & (n - 1);
    const std::complex<double> x = fab[k];
    const std::complex<double> xc = std::conj(fab[kc]);
    const std::complex<double> fa = 0.5 * (x + xc);
    const std::complex<double> fb =
        std::complex<double>(0.0, -0.5) * (x - xc);
    prod[k] = fa * fb;
  }
  fft_inplace(prod, true);
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = prod[i].real();
  return out;
}

}  // namespace convoforge
