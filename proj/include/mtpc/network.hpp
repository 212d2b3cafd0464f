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

// Pieces shared by the spiking back-ends: the dense pattern tensor they
// consume, named parameter views, and the spike nonlinearity selector.

#ifndef MTPC_NETWORK_HPP_
#define MTPC_NETWORK_HPP_

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtpc/encoder.hpp"
#include "mtpc/error.hpp"
#include "mtpc/lif.hpp"

namespace mtpc {

/// Spike counts as a dense (pair, channel, delay) tensor.
template <std::floating_point T>
struct PatternTensor {
  std::size_t n_pairs = 0;
  std::size_t n_channels = 0;
  std::size_t n_delays = 0;
  std::vector<T> values;

  T at(std::size_t p, std::size_t c, std::size_t k) const {
    return values[(p * n_channels + c) * n_delays + k];
  }

  static PatternTensor from_pattern(const MultiPairPattern& pattern) {
    PatternTensor out;
    out.n_pairs = pattern.n_pairs();
    out.n_channels = pattern.n_channels();
    out.n_delays = pattern.n_delays();
    out.values.reserve(out.n_pairs * out.n_channels * out.n_delays);
    for (const auto& cp : pattern.patterns) {
      if (cp.n_channels != out.n_channels || cp.n_delays != out.n_delays) {
        throw std::invalid_argument("pair patterns must share dimensions");
      }
      for (auto c : cp.counts) out.values.push_back(static_cast<T>(c));
    }
    return out;
  }
};

/// Which function maps a membrane potential to a spike in the forward pass.
/// kRelaxed substitutes relaxed_spike() for the step function and disables
/// refractoriness; it exists to check gradients against finite differences.
enum class SpikeMode { kHard, kRelaxed };

/// Readout neurons: spiking LIF units whose spike counts are the rates, or
/// non-spiking leaky integrators whose summed potential is used instead.
enum class Readout : int { kSpiking = 0, kLeakyIntegrator = 1 };

template <class T>
struct TensorRef {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<T> data;
};

/// Gradients laid out like a model's trainable tensor list.
template <std::floating_point T>
using GradList = std::vector<std::vector<T>>;

/// Zero-mean uniform values with variance 1 / fan_in.
template <std::floating_point T, class Rng>
void init_uniform(std::vector<T>& w, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(3.0 / double(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& x : w) x = static_cast<T>(dist(rng));
}

template <std::floating_point T>
inline T spike_value(T u, T threshold, SpikeMode mode) {
  if (mode == SpikeMode::kRelaxed) return relaxed_spike(u, threshold);
  return u >= threshold ? T(1) : T(0);
}

template <std::floating_point T>
bool all_finite(const GradList<T>& g) {
  for (const auto& v : g)
    for (T x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

namespace detail {

// One LIF layer update shared by hidden and readout layers. `v` is the
// post-reset potential carried between steps.
template <std::floating_point T>
void lif_layer_step(const LifParams<T>& p, SpikeMode mode, std::span<const T> current,
                    std::span<T> v, std::span<int> refractory, T* u_out, T* z_out,
                    std::uint8_t* active_out) {
  const T alpha = p.decay();
  const T beta = T(1) - alpha;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(current[i])) throw NumericalError("non-finite input current");
    if (mode == SpikeMode::kHard && refractory[i] > 0) {
      --refractory[i];
      v[i] = T(0);
      u_out[i] = T(0);
      z_out[i] = T(0);
      active_out[i] = 0;
      continue;
    }
    const T u = alpha * v[i] + beta * current[i];
    const T z = spike_value(u, p.threshold, mode);
    u_out[i] = u;
    z_out[i] = z;
    active_out[i] = 1;
    v[i] = u * (T(1) - z);
    if (mode == SpikeMode::kHard && z > T(0)) {
      v[i] = T(0);
      refractory[i] = p.refractory_steps;
    }
  }
}

// Reverse step of lif_layer_step. `dz` is dLoss/dz(t) from the layers this
// one feeds; `gv` enters as dLoss/dV(t) and leaves as dLoss/dV(t-1);
// `gi` receives dLoss/dI(t).
template <std::floating_point T>
void lif_layer_backward(const LifParams<T>& p, std::size_t n, const T* u, const T* z,
                        const std::uint8_t* active, const T* dz, T* gv, T* gi) {
  const T alpha = p.decay();
  const T beta = T(1) - alpha;
  for (std::size_t i = 0; i < n; ++i) {
    T gu = T(0);
    if (active[i]) {
      gu = gv[i] * (T(1) - z[i]);
      const T sg = surrogate_grad(u[i], p.threshold);
      if (sg != T(0)) gu += (dz[i] - gv[i] * u[i]) * sg;
    }
    gi[i] = beta * gu;
    gv[i] = alpha * gu;
  }
}

}  // namespace detail

}  // namespace mtpc

#endif  // MTPC_NETWORK_HPP_
