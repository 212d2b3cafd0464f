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

// Generalized cross-correlation with phase transform.

#ifndef MTPC_GCC_PHAT_HPP_
#define MTPC_GCC_PHAT_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "mtpc/error.hpp"
#include "mtpc/fft.hpp"

namespace mtpc {

struct TdoaEstimate {
  double delay = 0.0;       // seconds; positive when x2 lags x1
  double confidence = 1.0;  // correlation peak over mean |correlation|, at least 1
  long peak_lag = 0;        // integer argmax lag in samples, before refinement
};

/// Lag of `x2` relative to `x1`, searched within +-max_lag seconds.
///
/// The cross-power spectrum is whitened bin by bin (bins of zero magnitude
/// are dropped) and transformed back; the integer argmax is refined with a
/// parabola through the peak and its two neighbours.
inline TdoaEstimate gcc_phat(std::span<const double> x1, std::span<const double> x2,
                             double sample_rate, double max_lag_s) {
  if (x1.size() != x2.size()) throw std::invalid_argument("gcc_phat inputs must have equal length");
  const auto max_lag = static_cast<long>(std::floor(max_lag_s * sample_rate));
  if (max_lag < 1 || x1.size() < static_cast<std::size_t>(2 * max_lag)) {
    throw std::invalid_argument("gcc_phat input shorter than twice the lag range");
  }
  const std::size_t n = next_power_of_two(2 * x1.size());
  auto s1 = fft_real<double>(x1, n);
  auto s2 = fft_real<double>(x2, n);
  std::vector<std::complex<double>> cross(n);
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    const auto g = s2[k] * std::conj(s1[k]);
    const double mag = std::abs(g);
    if (mag > 1e-300) {
      cross[k] = g / mag;
      any = true;
    }
  }
  if (!any) throw DataError("undefined correlation");
  const auto r = ifft_real<double>(std::move(cross));
  auto at = [&](long lag) { return r[static_cast<std::size_t>((lag + long(n)) % long(n))]; };

  long best = -max_lag;
  double peak = at(best);
  double abs_sum = 0.0;
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    const double v = at(lag);
    abs_sum += std::abs(v);
    if (v > peak) {
      peak = v;
      best = lag;
    }
  }
  double offset = 0.0;
  if (best > -max_lag && best < max_lag) {
    const double ym = at(best - 1), y0 = peak, yp = at(best + 1);
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  }
  TdoaEstimate est;
  est.peak_lag = best;
  est.delay = (double(best) + offset) / sample_rate;
  const double mean_abs = abs_sum / double(2 * max_lag + 1);
  est.confidence = mean_abs > 0.0 ? std::max(1.0, peak / mean_abs) : 1.0;
  return est;
}

}  // namespace mtpc

#endif  // MTPC_GCC_PHAT_HPP_
