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

// Recurrent spiking back-end.
//
// The pair patterns are laid end to end along the delay axis, so a pattern
// with P pairs and D delay lines becomes a sequence of P * D steps whose
// input vector is the channel column of counts at that step. Per step:
//
//   I_h = s W_in^T x(t) + W_rec^T z_h(t-1) + b_h    hidden LIF layer
//   I_o = W_out^T z_h(t) + b_o                      readout layer
//
// Output rates are the per-readout spike counts summed over all steps.

#ifndef MTPC_RSNN_HPP_
#define MTPC_RSNN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mtpc/lif.hpp"
#include "mtpc/network.hpp"

namespace mtpc {

template <std::floating_point T>
struct RsnnParams {
  using Scalar = T;

  std::size_t n_in = 40;
  std::size_t n_hidden = 128;
  std::size_t n_out = 360;
  std::vector<T> w_in;   // n_in x n_hidden
  std::vector<T> w_rec;  // n_hidden (pre) x n_hidden (post)
  std::vector<T> w_out;  // n_hidden x n_out
  std::vector<T> b_hidden;
  std::vector<T> b_out;
  LifParams<T> hidden_lif;
  LifParams<T> output_lif;
  T input_scale = T(1);
  Readout readout = Readout::kSpiking;

  static RsnnParams init(std::size_t n_in, std::size_t n_hidden, std::size_t n_out,
                         std::uint64_t seed, LifParams<T> lif = {}) {
    RsnnParams p;
    p.n_in = n_in;
    p.n_hidden = n_hidden;
    p.n_out = n_out;
    p.w_in.resize(n_in * n_hidden);
    p.w_rec.resize(n_hidden * n_hidden);
    p.w_out.resize(n_hidden * n_out);
    p.b_hidden.assign(n_hidden, T(0));
    p.b_out.assign(n_out, T(0));
    p.hidden_lif = lif;
    p.output_lif = lif;
    std::mt19937_64 rng(seed);
    init_uniform(p.w_in, n_in, rng);
    init_uniform(p.w_rec, n_hidden, rng);
    init_uniform(p.w_out, n_hidden, rng);
    return p;
  }

  std::vector<TensorRef<T>> trainable() {
    using D = std::vector<std::uint32_t>;
    auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    return {{"w_in", D{u(n_in), u(n_hidden)}, w_in},
            {"w_rec", D{u(n_hidden), u(n_hidden)}, w_rec},
            {"w_out", D{u(n_hidden), u(n_out)}, w_out},
            {"b_hidden", D{u(n_hidden)}, b_hidden},
            {"b_out", D{u(n_out)}, b_out}};
  }

  void validate() const {
    hidden_lif.validate();
    output_lif.validate();
    if (w_in.size() != n_in * n_hidden || w_rec.size() != n_hidden * n_hidden ||
        w_out.size() != n_hidden * n_out || b_hidden.size() != n_hidden || b_out.size() != n_out) {
      throw std::invalid_argument("rsnn parameter shapes are inconsistent");
    }
  }
};

/// Time-major input: steps x n_in.
template <std::floating_point T>
struct InputSequence {
  std::size_t n_in = 0;
  std::size_t steps = 0;
  std::vector<T> values;

  const T* step(std::size_t t) const { return values.data() + t * n_in; }

  /// Pairs concatenated along the delay axis: step p * D + k carries the
  /// channel column k of pair p.
  static InputSequence tandem(const PatternTensor<T>& x) {
    InputSequence s;
    s.n_in = x.n_channels;
    s.steps = x.n_pairs * x.n_delays;
    s.values.resize(s.n_in * s.steps);
    for (std::size_t p = 0; p < x.n_pairs; ++p)
      for (std::size_t k = 0; k < x.n_delays; ++k)
        for (std::size_t c = 0; c < x.n_channels; ++c)
          s.values[(p * x.n_delays + k) * s.n_in + c] = x.at(p, c, k);
    return s;
  }
};

/// Everything the backward pass needs from a forward run.
template <std::floating_point T>
struct RsnnTrace {
  std::size_t steps = 0;
  std::vector<T> u_hidden, z_hidden;  // steps x n_hidden, pre-reset potential and spike
  std::vector<std::uint8_t> active_hidden;
  std::vector<T> u_out, z_out;  // steps x n_out
  std::vector<std::uint8_t> active_out;
  std::vector<T> rates;  // n_out

  /// Rates divided by the step count.
  std::vector<T> normalized_rates() const {
    std::vector<T> o(rates);
    for (auto& v : o) v /= T(steps);
    return o;
  }
};


template <std::floating_point T>
RsnnTrace<T> rsnn_forward(const RsnnParams<T>& params, const InputSequence<T>& input,
                          SpikeMode mode = SpikeMode::kHard) {
  params.validate();
  if (input.n_in != params.n_in) throw std::invalid_argument("rsnn input dimension mismatch");
  const std::size_t nh = params.n_hidden, no = params.n_out, steps = input.steps;
  RsnnTrace<T> tr;
  tr.steps = steps;
  tr.u_hidden.assign(steps * nh, T(0));
  tr.z_hidden.assign(steps * nh, T(0));
  tr.active_hidden.assign(steps * nh, 0);
  tr.u_out.assign(steps * no, T(0));
  tr.z_out.assign(steps * no, T(0));
  tr.active_out.assign(steps * no, 0);
  tr.rates.assign(no, T(0));

  std::vector<T> v_h(nh, T(0)), v_o(no, T(0)), i_h(nh), i_o(no);
  std::vector<int> ref_h(nh, 0), ref_o(no, 0);
  const bool leaky = params.readout == Readout::kLeakyIntegrator;
  const T alpha_o = params.output_lif.decay();

  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(params.b_hidden.begin(), params.b_hidden.end(), i_h.begin());
    const T* x = input.step(t);
    for (std::size_t i = 0; i < params.n_in; ++i) {
      if (x[i] == T(0)) continue;
      const T s = params.input_scale * x[i];
      const T* row = params.w_in.data() + i * nh;
      for (std::size_t h = 0; h < nh; ++h) i_h[h] += s * row[h];
    }
    if (t > 0) {
      const T* zp = tr.z_hidden.data() + (t - 1) * nh;
      for (std::size_t j = 0; j < nh; ++j) {
        if (zp[j] == T(0)) continue;
        const T* row = params.w_rec.data() + j * nh;
        for (std::size_t h = 0; h < nh; ++h) i_h[h] += zp[j] * row[h];
      }
    }
    detail::lif_layer_step<T>(params.hidden_lif, mode, i_h, v_h, ref_h, tr.u_hidden.data() + t * nh,
                              tr.z_hidden.data() + t * nh, tr.active_hidden.data() + t * nh);

    std::copy(params.b_out.begin(), params.b_out.end(), i_o.begin());
    const T* zh = tr.z_hidden.data() + t * nh;
    for (std::size_t h = 0; h < nh; ++h) {
      if (zh[h] == T(0)) continue;
      const T* row = params.w_out.data() + h * no;
      for (std::size_t j = 0; j < no; ++j) i_o[j] += zh[h] * row[j];
    }
    T* uo = tr.u_out.data() + t * no;
    if (leaky) {
      for (std::size_t j = 0; j < no; ++j) {
        if (!std::isfinite(i_o[j])) throw NumericalError("non-finite readout current");
        v_o[j] = alpha_o * v_o[j] + (T(1) - alpha_o) * i_o[j];
        uo[j] = v_o[j];
        tr.active_out[t * no + j] = 1;
        tr.rates[j] += v_o[j];
      }
    } else {
      T* zo = tr.z_out.data() + t * no;
      detail::lif_layer_step<T>(params.output_lif, mode, i_o, v_o, ref_o, uo, zo,
                                tr.active_out.data() + t * no);
      for (std::size_t j = 0; j < no; ++j) tr.rates[j] += zo[j];
    }
  }
  return tr;
}

/// Reverse-mode gradient of a scalar loss through the unrolled network.
/// `grad_normalized` is dLoss/dO for O = rates / steps. The reset
/// V = U (1 - z) is differentiated, and dz/dU is surrogate_grad(U) in both
/// spike modes, so in kRelaxed mode this is the exact gradient.
/// Returns gradients in the order of RsnnParams::trainable().
template <std::floating_point T>
GradList<T> rsnn_backward(const RsnnParams<T>& params, const InputSequence<T>& input,
                          const RsnnTrace<T>& tr, std::span<const T> grad_normalized) {
  const std::size_t nh = params.n_hidden, no = params.n_out, ni = params.n_in, steps = tr.steps;
  if (grad_normalized.size() != no) throw std::invalid_argument("output gradient size mismatch");
  GradList<T> g(5);
  g[0].assign(ni * nh, T(0));
  g[1].assign(nh * nh, T(0));
  g[2].assign(nh * no, T(0));
  g[3].assign(nh, T(0));
  g[4].assign(no, T(0));
  auto& gw_in = g[0];
  auto& gw_rec = g[1];
  auto& gw_out = g[2];
  auto& gb_h = g[3];
  auto& gb_o = g[4];

  std::vector<T> drate(no);
  for (std::size_t j = 0; j < no; ++j) drate[j] = grad_normalized[j] / T(steps);

  const T ah = params.hidden_lif.decay(), bh = T(1) - ah;
  const T ao = params.output_lif.decay(), bo = T(1) - ao;
  const T th_h = params.hidden_lif.threshold, th_o = params.output_lif.threshold;
  const bool leaky = params.readout == Readout::kLeakyIntegrator;

  std::vector<T> gv_o(no, T(0)), gv_h(nh, T(0));  // dL/dV(t) carried from step t+1
  std::vector<T> gi_o(no), gi_h(nh), gi_h_next(nh, T(0));
  std::vector<std::size_t> nz_o, nz_h;  // nonzero entries of gi_o and gi_h_next
  std::vector<T> dz_h(nh);
  std::vector<T> w_out_t(no * nh), w_rec_t(nh * nh);
  for (std::size_t h = 0; h < nh; ++h) {
    for (std::size_t j = 0; j < no; ++j) w_out_t[j * nh + h] = params.w_out[h * no + j];
    for (std::size_t j = 0; j < nh; ++j) w_rec_t[j * nh + h] = params.w_rec[h * nh + j];
  }
  nz_o.reserve(no);
  nz_h.reserve(nh);

  for (std::size_t t = steps; t-- > 0;) {
    nz_o.clear();
    nz_h.clear();
    for (std::size_t j = 0; j < nh; ++j)
      if (gi_h_next[j] != T(0)) nz_h.push_back(j);
    const T* uo = tr.u_out.data() + t * no;
    const T* zo = tr.z_out.data() + t * no;
    const std::uint8_t* act_o = tr.active_out.data() + t * no;
    for (std::size_t j = 0; j < no; ++j) {
      T gu;
      if (leaky) {
        gu = drate[j] + gv_o[j];
      } else if (!act_o[j]) {
        gu = T(0);
      } else {
        const T sg = surrogate_grad(uo[j], th_o);
        gu = gv_o[j] * (T(1) - zo[j]);
        if (sg != T(0)) gu += (drate[j] - gv_o[j] * uo[j]) * sg;
      }
      gi_o[j] = bo * gu;
      gv_o[j] = ao * gu;
      gb_o[j] += gi_o[j];
      if (gi_o[j] != T(0)) nz_o.push_back(j);
    }

    // dz_h = W_out gi_o + W_rec gi_h(t+1), accumulated column by column over
    // the nonzero entries through the transposed weights.
    std::fill(dz_h.begin(), dz_h.end(), T(0));
    for (std::size_t j : nz_o) {
      const T g = gi_o[j];
      const T* col = w_out_t.data() + j * nh;
      for (std::size_t h = 0; h < nh; ++h) dz_h[h] += col[h] * g;
    }
    for (std::size_t j : nz_h) {
      const T g = gi_h_next[j];
      const T* col = w_rec_t.data() + j * nh;
      for (std::size_t h = 0; h < nh; ++h) dz_h[h] += col[h] * g;
    }
    const bool dense_o = nz_o.size() * 4 > no;
    const T* uh = tr.u_hidden.data() + t * nh;
    const T* zh = tr.z_hidden.data() + t * nh;
    const std::uint8_t* act_h = tr.active_hidden.data() + t * nh;
    for (std::size_t h = 0; h < nh; ++h) {
      if (zh[h] != T(0)) {
        T* row = gw_out.data() + h * no;
        if (dense_o) {
          for (std::size_t j = 0; j < no; ++j) row[j] += zh[h] * gi_o[j];
        } else {
          for (std::size_t j : nz_o) row[j] += zh[h] * gi_o[j];
        }
      }
      T gu = T(0);
      if (act_h[h]) {
        gu = gv_h[h] * (T(1) - zh[h]);
        const T sg = surrogate_grad(uh[h], th_h);
        if (sg != T(0)) gu += (dz_h[h] - gv_h[h] * uh[h]) * sg;
      }
      gi_h[h] = bh * gu;
      gv_h[h] = ah * gu;
      gb_h[h] += gi_h[h];
    }

    const T* x = input.step(t);
    for (std::size_t i = 0; i < ni; ++i) {
      if (x[i] == T(0)) continue;
      const T s = params.input_scale * x[i];
      T* row = gw_in.data() + i * nh;
      for (std::size_t h = 0; h < nh; ++h) row[h] += s * gi_h[h];
    }
    if (t > 0) {
      const T* zp = tr.z_hidden.data() + (t - 1) * nh;
      for (std::size_t j = 0; j < nh; ++j) {
        if (zp[j] == T(0)) continue;
        T* row = gw_rec.data() + j * nh;
        for (std::size_t h = 0; h < nh; ++h) row[h] += zp[j] * gi_h[h];
      }
    }
    gi_h_next.swap(gi_h);
  }
  return g;
}

/// Input scale that maps the mean nonzero count of `inputs` to `target`.
template <std::floating_point T, class Range>
T calibrate_input_scale(const Range& inputs, T target) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : inputs) {
    for (T v : x.values) {
      if (v == T(0)) continue;
      sum += double(v);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("no nonzero inputs to calibrate against");
  return static_cast<T>(double(target) / (sum / double(n)));
}

}  // namespace mtpc

#endif  // MTPC_RSNN_HPP_
