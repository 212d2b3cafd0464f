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

// Azimuth targets, the training loss, peak decoding and the error metric.
// All azimuths are in degrees on a 360-bin circle, bin i covering i degrees.

#ifndef MTPC_AZIMUTH_HPP_
#define MTPC_AZIMUTH_HPP_

#include <cmath>
#include <concepts>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "mtpc/error.hpp"

namespace mtpc {

inline constexpr std::size_t kAzimuthBins = 360;

/// Shortest angular distance in degrees, in [0, 180].
inline double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

/// Cyclic Gaussian with peak 1 at `azimuth` and width `sigma` degrees.
template <std::floating_point T = double>
std::vector<T> gaussian_label(double azimuth, double sigma = 8.0) {
  if (!(azimuth >= 0.0 && azimuth < 360.0)) throw std::invalid_argument("azimuth must be in [0, 360)");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  std::vector<T> out(kAzimuthBins);
  for (std::size_t i = 0; i < kAzimuthBins; ++i) {
    const double d = circular_distance(double(i), azimuth);
    out[i] = static_cast<T>(std::exp(-d * d / (2.0 * sigma * sigma)));
  }
  return out;
}

template <std::floating_point T>
T mse_loss(std::span<const T> output, std::span<const T> label) {
  if (output.size() != label.size()) throw std::invalid_argument("loss length mismatch");
  if (output.empty()) throw std::invalid_argument("loss of empty vectors");
  T acc = T(0);
  for (std::size_t i = 0; i < output.size(); ++i) {
    const T d = label[i] - output[i];
    acc += d * d;
  }
  return acc / T(output.size());
}

/// dLoss/dOutput of mse_loss.
template <std::floating_point T>
std::vector<T> mse_grad(std::span<const T> output, std::span<const T> label) {
  if (output.size() != label.size()) throw std::invalid_argument("loss length mismatch");
  std::vector<T> g(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) {
    g[i] = T(2) * (output[i] - label[i]) / T(output.size());
  }
  return g;
}

/// Index of the largest rate. Tied maxima resolve to the circular mean of
/// their indices rounded to the nearest degree; when the tied indices cancel
/// out (no defined mean direction) the lowest of them is returned.
template <class R>
int decode_peak(std::span<const R> rates) {
  if (rates.size() != kAzimuthBins) throw std::invalid_argument("expected 360 output rates");
  R best = rates[0];
  for (R r : rates)
    if (r > best) best = r;
  bool any = false;
  for (R r : rates)
    if (r != R(0)) any = true;
  if (!any) throw DataError("no activity");
  double sx = 0.0, sy = 0.0;
  int first = -1, ties = 0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] != best) continue;
    if (first < 0) first = static_cast<int>(i);
    ++ties;
    const double a = double(i) * std::numbers::pi / 180.0;
    sx += std::cos(a);
    sy += std::sin(a);
  }
  if (ties == 1) return first;
  if (std::hypot(sx, sy) < 1e-9 * ties) return first;
  double deg = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  int out = static_cast<int>(std::lround(deg)) % 360;
  return out;
}

template <class R>
int decode_peak(const std::vector<R>& rates) {
  return decode_peak(std::span<const R>(rates));
}

/// Mean circular absolute error in degrees.
inline double mae(std::span<const double> estimates, std::span<const double> labels) {
  if (estimates.size() != labels.size()) throw std::invalid_argument("mae length mismatch");
  if (estimates.empty()) throw std::invalid_argument("mae of empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) acc += circular_distance(estimates[i], labels[i]);
  return acc / double(estimates.size());
}

}  // namespace mtpc

#endif  // MTPC_AZIMUTH_HPP_
