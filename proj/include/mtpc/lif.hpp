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

// Leaky integrate-and-fire dynamics, tau_m dV/dt = -V + I, discretized with
// exponential Euler over a step dt:
//
//   V <- V exp(-dt/tau_m) + I (1 - exp(-dt/tau_m))
//
// A neuron whose updated potential reaches the threshold spikes, is reset to
// exactly 0 and then ignores its input for `refractory_steps` steps.

#ifndef MTPC_LIF_HPP_
#define MTPC_LIF_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mtpc/error.hpp"

namespace mtpc {

template <std::floating_point T>
struct LifParams {
  T tau_m = T(20);
  T threshold = T(1);
  T dt = T(1);
  int refractory_steps = 1;

  T decay() const { return std::exp(-dt / tau_m); }

  void validate() const {
    if (!(tau_m > 0)) throw std::invalid_argument("tau_m must be positive");
    if (!(threshold > 0)) throw std::invalid_argument("threshold must be positive");
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (refractory_steps < 0) throw std::invalid_argument("refractory_steps must be non-negative");
  }
};

template <std::floating_point T>
struct LifState {
  std::vector<T> v;
  std::vector<int> refractory;

  LifState() = default;
  explicit LifState(std::size_t n) : v(n, T(0)), refractory(n, 0) {}
  std::size_t size() const { return v.size(); }
};

/// Pseudo-derivative of the spike with respect to the membrane potential:
/// a triangle of height 1 centred on the threshold, zero outside (0, 2 theta).
template <std::floating_point T>
constexpr T surrogate_grad(T v, T threshold) {
  const T r = T(1) - std::abs((v - threshold) / threshold);
  return r > T(0) ? r : T(0);
}

/// Antiderivative of surrogate_grad, rising from 0 at v <= 0 to `threshold`
/// at v >= 2 theta. Replacing the step function by this ramp yields a
/// differentiable network whose exact gradient equals the surrogate gradient.
template <std::floating_point T>
constexpr T relaxed_spike(T v, T threshold) {
  const T u = v / threshold;
  if (u <= T(0)) return T(0);
  if (u <= T(1)) return threshold * u * u / T(2);
  if (u <= T(2)) return threshold * (T(2) * u - u * u / T(2) - T(1));
  return threshold;
}

template <std::floating_point T>
struct LifStepResult {
  LifState<T> state;
  std::vector<std::uint8_t> spikes;
};

/// Advances every neuron of `state` by one step.
template <std::floating_point T>
void lif_step_inplace(LifState<T>& state, std::span<const T> current, const LifParams<T>& params,
                      std::span<std::uint8_t> spikes) {
  if (current.size() != state.size() || spikes.size() != state.size()) {
    throw std::invalid_argument("lif_step dimension mismatch");
  }
  const T alpha = params.decay();
  const T beta = T(1) - alpha;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!std::isfinite(current[i])) throw NumericalError("non-finite input current");
    spikes[i] = 0;
    if (state.refractory[i] > 0) {
      --state.refractory[i];
      state.v[i] = T(0);
      continue;
    }
    const T u = alpha * state.v[i] + beta * current[i];
    if (u >= params.threshold) {
      spikes[i] = 1;
      state.v[i] = T(0);
      state.refractory[i] = params.refractory_steps;
    } else {
      state.v[i] = u;
    }
  }
}

template <std::floating_point T>
LifStepResult<T> lif_step(LifState<T> state, std::span<const T> current, const LifParams<T>& params) {
  params.validate();
  LifStepResult<T> out;
  out.spikes.assign(state.size(), 0);
  lif_step_inplace<T>(state, current, params, out.spikes);
  out.state = std::move(state);
  return out;
}

}  // namespace mtpc

#endif  // MTPC_LIF_HPP_
