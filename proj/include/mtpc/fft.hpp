// Copyright 2026 The MTPC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Iterative radix-2 Cooley-Tukey transform.
//
// Forward convention: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
// The inverse is scaled by 1/N so that inverse(forward(x)) == x.

#ifndef MTPC_FFT_HPP_
#define MTPC_FFT_HPP_

#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mtpc {

constexpr bool is_power_of_two(std::size_t n) noexcept {
  return n != 0 && (n & (n - 1)) == 0;
}

constexpr std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <std::floating_point T>
void fft_inplace(std::span<std::complex<T>> data, bool inverse = false) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("fft length must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const T sign = inverse ? T(1) : T(-1);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles are evaluated directly rather than by recurrence to keep the
    // round-off at the level of a single cos/sin call.
    std::vector<std::complex<T>> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const T angle = sign * T(2) * std::numbers::pi_v<T> * T(k) / T(len);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<T> u = data[start + k];
        const std::complex<T> v = data[start + k + half] * twiddle[k];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const T scale = T(1) / T(n);
    for (auto& x : data) x *= scale;
  }
}

/// Forward transform of a real sequence, zero-padded or truncated to `n`.
template <std::floating_point T>
std::vector<std::complex<T>> fft_real(std::span<const T> x, std::size_t n) {
  std::vector<std::complex<T>> out(n);
  const std::size_t m = x.size() < n ? x.size() : n;
  for (std::size_t i = 0; i < m; ++i) out[i] = {x[i], T(0)};
  fft_inplace<T>(out, false);
  return out;
}

template <std::floating_point T>
std::vector<T> ifft_real(std::vector<std::complex<T>> spectrum) {
  fft_inplace<T>(spectrum, true);
  std::vector<T> out(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) out[i] = spectrum[i].real();
  return out;
}

}  // namespace mtpc

#endif  // MTPC_FFT_HPP_
