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

// Convolutional spiking back-end.
//
// The pair patterns are stacked as input planes of a delay x channel image.
// The normalized counts drive the first convolution as a constant current
// for `steps` steps. Every stage (3x3 stride-2 convolutions, the dense layer
// and the readout) is a LIF layer; rates are readout spike counts.
//
// Activations are stored height-major with channels innermost (HWC) and
// convolution kernels as [in][ky][kx][out], so the innermost loops run over
// contiguous output channels.

#ifndef MTPC_CSNN_HPP_
#define MTPC_CSNN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mtpc/azimuth.hpp"
#include "mtpc/lif.hpp"
#include "mtpc/network.hpp"
#include "mtpc/trainer.hpp"

namespace mtpc {

/// Geometry of one 3x3, stride 2, padding 1 convolution.
struct ConvShape {
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::size_t out_c = 0, out_h = 0, out_w = 0;

  static constexpr std::size_t reduce(std::size_t s) { return (s + 1) / 2; }

  static ConvShape make(std::size_t in_c, std::size_t in_h, std::size_t in_w, std::size_t out_c) {
    return {in_c, in_h, in_w, out_c, reduce(in_h), reduce(in_w)};
  }

  std::size_t in_size() const { return in_c * in_h * in_w; }
  std::size_t out_size() const { return out_c * out_h * out_w; }
  std::size_t weight_size() const { return in_c * 9 * out_c; }
};

namespace detail {

// Calls f(tap, out_offset) for every kernel tap through which input pixel
// (y, x) reaches an output pixel; out_offset addresses its first channel.
template <class F>
void for_each_tap(const ConvShape& s, std::size_t y, std::size_t x, F&& f) {
  for (std::size_t ky = 0; ky < 3; ++ky) {
    const std::size_t oy2 = y + 1 - ky;
    if (y + 1 < ky || oy2 % 2 || oy2 / 2 >= s.out_h) continue;
    for (std::size_t kx = 0; kx < 3; ++kx) {
      const std::size_t ox2 = x + 1 - kx;
      if (x + 1 < kx || ox2 % 2 || ox2 / 2 >= s.out_w) continue;
      f(ky * 3 + kx, ((oy2 / 2) * s.out_w + ox2 / 2) * s.out_c);
    }
  }
}

// out += conv(in, w); zero inputs are skipped.
template <class T>
void conv_accumulate(const ConvShape& s, const T* in, const T* w, T* out) {
  for (std::size_t y = 0; y < s.in_h; ++y) {
    for (std::size_t x = 0; x < s.in_w; ++x) {
      const T* px = in + (y * s.in_w + x) * s.in_c;
      for (std::size_t i = 0; i < s.in_c; ++i) {
        const T v = px[i];
        if (v == T(0)) continue;
        for_each_tap(s, y, x, [&](std::size_t tap, std::size_t o0) {
          const T* wr = w + (i * 9 + tap) * s.out_c;
          T* op = out + o0;
          for (std::size_t o = 0; o < s.out_c; ++o) op[o] += v * wr[o];
        });
      }
    }
  }
}

// gw += in (x) gout over all taps.
template <class T>
void conv_weight_grad(const ConvShape& s, const T* in, const T* gout, T* gw) {
  for (std::size_t y = 0; y < s.in_h; ++y) {
    for (std::size_t x = 0; x < s.in_w; ++x) {
      const T* px = in + (y * s.in_w + x) * s.in_c;
      for (std::size_t i = 0; i < s.in_c; ++i) {
        const T v = px[i];
        if (v == T(0)) continue;
        for_each_tap(s, y, x, [&](std::size_t tap, std::size_t o0) {
          T* gr = gw + (i * 9 + tap) * s.out_c;
          const T* go = gout + o0;
          for (std::size_t o = 0; o < s.out_c; ++o) gr[o] += v * go[o];
        });
      }
    }
  }
}

// gin = conv^T(gout).
template <class T>
void conv_input_grad(const ConvShape& s, const T* w, const T* gout, T* gin) {
  std::fill(gin, gin + s.in_size(), T(0));
  for (std::size_t y = 0; y < s.in_h; ++y) {
    for (std::size_t x = 0; x < s.in_w; ++x) {
      T* gp = gin + (y * s.in_w + x) * s.in_c;
      for_each_tap(s, y, x, [&](std::size_t tap, std::size_t o0) {
        const T* go = gout + o0;
        for (std::size_t i = 0; i < s.in_c; ++i) {
          const T* wr = w + (i * 9 + tap) * s.out_c;
          T acc = T(0);
          for (std::size_t o = 0; o < s.out_c; ++o) acc += wr[o] * go[o];
          gp[i] += acc;
        }
      });
    }
  }
}

// out[j] += sum_i in[i] w[i][j]; zero inputs are skipped.
template <class T>
void dense_accumulate(std::size_t n_in, std::size_t n_out, const T* in, const T* w, T* out) {
  for (std::size_t i = 0; i < n_in; ++i) {
    if (in[i] == T(0)) continue;
    const T* row = w + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += in[i] * row[j];
  }
}

}  // namespace detail

template <std::floating_point T>
struct CsnnParams {
  using Scalar = T;

  std::size_t n_pairs = 6;
  std::size_t n_delays = 51;
  std::size_t n_channels = 40;
  std::vector<std::size_t> conv_channels = {12, 24, 48, 96};
  std::size_t n_fc = 512;
  std::size_t n_out = 360;
  std::vector<std::vector<T>> conv_w;
  std::vector<std::vector<T>> conv_b;
  std::vector<T> fc_w;  // flattened last conv x n_fc
  std::vector<T> fc_b;
  std::vector<T> out_w;  // n_fc x n_out
  std::vector<T> out_b;
  LifParams<T> lif;
  std::size_t steps = 10;
  T input_norm = T(1);  // counts at or above this map to full current
  Readout readout = Readout::kSpiking;

  std::vector<ConvShape> conv_shapes() const {
    std::vector<ConvShape> out;
    std::size_t c = n_pairs, h = n_delays, w = n_channels;
    for (std::size_t oc : conv_channels) {
      out.push_back(ConvShape::make(c, h, w, oc));
      c = oc;
      h = out.back().out_h;
      w = out.back().out_w;
    }
    return out;
  }

  std::size_t flat_size() const {
    const auto s = conv_shapes();
    return s.empty() ? n_pairs * n_delays * n_channels : s.back().out_size();
  }

  static CsnnParams init(std::size_t n_pairs, std::size_t n_delays, std::size_t n_channels,
                         std::uint64_t seed, LifParams<T> lif = {},
                         std::vector<std::size_t> conv_channels = {12, 24, 48, 96},
                         std::size_t n_fc = 512, std::size_t n_out = 360) {
    CsnnParams p;
    p.n_pairs = n_pairs;
    p.n_delays = n_delays;
    p.n_channels = n_channels;
    p.conv_channels = std::move(conv_channels);
    p.n_fc = n_fc;
    p.n_out = n_out;
    p.lif = lif;
    std::mt19937_64 rng(seed);
    for (const auto& s : p.conv_shapes()) {
      p.conv_w.emplace_back(s.weight_size());
      init_uniform(p.conv_w.back(), s.in_c * 9, rng);
      p.conv_b.emplace_back(s.out_c, T(0));
    }
    p.fc_w.resize(p.flat_size() * n_fc);
    init_uniform(p.fc_w, p.flat_size(), rng);
    p.fc_b.assign(n_fc, T(0));
    p.out_w.resize(n_fc * n_out);
    init_uniform(p.out_w, n_fc, rng);
    p.out_b.assign(n_out, T(0));
    return p;
  }

  std::vector<TensorRef<T>> trainable() {
    using D = std::vector<std::uint32_t>;
    auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    std::vector<TensorRef<T>> out;
    const auto shapes = conv_shapes();
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      const auto& s = shapes[l];
      const std::string n = "conv" + std::to_string(l + 1);
      out.push_back({n + ".w", D{u(s.in_c), 3, 3, u(s.out_c)}, conv_w[l]});
      out.push_back({n + ".b", D{u(s.out_c)}, conv_b[l]});
    }
    out.push_back({"fc.w", D{u(flat_size()), u(n_fc)}, fc_w});
    out.push_back({"fc.b", D{u(n_fc)}, fc_b});
    out.push_back({"out.w", D{u(n_fc), u(n_out)}, out_w});
    out.push_back({"out.b", D{u(n_out)}, out_b});
    return out;
  }

  void validate() const {
    lif.validate();
    if (steps == 0) throw std::invalid_argument("csnn needs at least one step");
    if (conv_channels.empty()) throw std::invalid_argument("csnn needs a convolution stage");
    if (!(input_norm > T(0))) throw std::invalid_argument("input_norm must be positive");
    const auto shapes = conv_shapes();
    bool ok = conv_w.size() == shapes.size() && conv_b.size() == shapes.size();
    for (std::size_t l = 0; ok && l < shapes.size(); ++l) {
      ok = conv_w[l].size() == shapes[l].weight_size() && conv_b[l].size() == shapes[l].out_c;
    }
    ok = ok && fc_w.size() == flat_size() * n_fc && fc_b.size() == n_fc &&
         out_w.size() == n_fc * n_out && out_b.size() == n_out;
    if (!ok) throw std::invalid_argument("csnn parameter shapes are inconsistent");
  }
};

/// 95th-percentile count over every entry of the given patterns.
template <std::floating_point T, class Range>
T percentile95_count(const Range& inputs) {
  std::vector<T> all;
  for (const auto& x : inputs) all.insert(all.end(), x.values.begin(), x.values.end());
  if (all.empty()) throw std::invalid_argument("no inputs to normalize against");
  const std::size_t k = static_cast<std::size_t>(std::ceil(0.95 * double(all.size()))) - 1;
  std::nth_element(all.begin(), all.begin() + std::ptrdiff_t(k), all.end());
  T v = all[k];
  if (!(v > T(0))) v = *std::max_element(all.begin(), all.end());
  return v > T(0) ? v : T(1);
}

/// Normalized input image in HWC layout: (delay, channel, pair).
template <std::floating_point T>
std::vector<T> csnn_input(const CsnnParams<T>& params, const PatternTensor<T>& x) {
  if (x.n_pairs != params.n_pairs || x.n_delays != params.n_delays ||
      x.n_channels != params.n_channels) {
    throw std::invalid_argument("csnn input shape mismatch");
  }
  std::vector<T> img(x.values.size());
  for (std::size_t p = 0; p < x.n_pairs; ++p)
    for (std::size_t c = 0; c < x.n_channels; ++c)
      for (std::size_t k = 0; k < x.n_delays; ++k)
        img[(k * x.n_channels + c) * x.n_pairs + p] =
            std::clamp(x.at(p, c, k) / params.input_norm, T(0), T(1));
  return img;
}

template <std::floating_point T>
struct CsnnTrace {
  std::size_t steps = 0;
  std::vector<T> input;
  // Per layer (convolutions, fc, readout): steps x size.
  std::vector<std::size_t> sizes;
  std::vector<std::vector<T>> u, z;
  std::vector<std::vector<std::uint8_t>> active;
  std::vector<T> rates;

  std::vector<T> normalized_rates() const {
    std::vector<T> o(rates);
    for (auto& v : o) v /= T(steps);
    return o;
  }
};

template <std::floating_point T>
CsnnTrace<T> csnn_forward(const CsnnParams<T>& params, const PatternTensor<T>& x,
                          SpikeMode mode = SpikeMode::kHard) {
  params.validate();
  const auto shapes = params.conv_shapes();
  const std::size_t nl = shapes.size() + 2;
  const std::size_t steps = params.steps;
  CsnnTrace<T> tr;
  tr.steps = steps;
  tr.input = csnn_input(params, x);
  for (const auto& s : shapes) tr.sizes.push_back(s.out_size());
  tr.sizes.push_back(params.n_fc);
  tr.sizes.push_back(params.n_out);
  for (std::size_t l = 0; l < nl; ++l) {
    tr.u.emplace_back(steps * tr.sizes[l], T(0));
    tr.z.emplace_back(steps * tr.sizes[l], T(0));
    tr.active.emplace_back(steps * tr.sizes[l], 0);
  }
  tr.rates.assign(params.n_out, T(0));

  std::vector<std::vector<T>> v(nl), cur(nl);
  std::vector<std::vector<int>> refr(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    v[l].assign(tr.sizes[l], T(0));
    cur[l].resize(tr.sizes[l]);
    refr[l].assign(tr.sizes[l], 0);
  }
  // The first stage sees the same current at every step.
  std::vector<T> cur0(tr.sizes[0]);
  if (!shapes.empty()) {
    for (std::size_t p = 0; p < shapes[0].out_h * shapes[0].out_w; ++p)
      std::copy(params.conv_b[0].begin(), params.conv_b[0].end(), cur0.begin() + p * shapes[0].out_c);
    detail::conv_accumulate(shapes[0], tr.input.data(), params.conv_w[0].data(), cur0.data());
  }
  const bool leaky = params.readout == Readout::kLeakyIntegrator;
  const T alpha = params.lif.decay();

  for (std::size_t t = 0; t < steps; ++t) {
    const T* prev = tr.input.data();
    for (std::size_t l = 0; l < nl; ++l) {
      const std::size_t n = tr.sizes[l];
      auto& c = cur[l];
      if (l < shapes.size()) {
        if (l == 0) {
          c = cur0;
        } else {
          const auto& s = shapes[l];
          for (std::size_t p = 0; p < s.out_h * s.out_w; ++p)
            std::copy(params.conv_b[l].begin(), params.conv_b[l].end(), c.begin() + p * s.out_c);
          detail::conv_accumulate(s, prev, params.conv_w[l].data(), c.data());
        }
      } else if (l == shapes.size()) {
        std::copy(params.fc_b.begin(), params.fc_b.end(), c.begin());
        const std::size_t n_in = shapes.empty() ? params.flat_size() : shapes.back().out_size();
        detail::dense_accumulate(n_in, params.n_fc, prev, params.fc_w.data(), c.data());
      } else {
        std::copy(params.out_b.begin(), params.out_b.end(), c.begin());
        detail::dense_accumulate(params.n_fc, params.n_out, prev, params.out_w.data(), c.data());
      }
      T* u = tr.u[l].data() + t * n;
      T* z = tr.z[l].data() + t * n;
      std::uint8_t* act = tr.active[l].data() + t * n;
      if (l + 1 == nl && leaky) {
        for (std::size_t j = 0; j < n; ++j) {
          if (!std::isfinite(c[j])) throw NumericalError("non-finite readout current");
          v[l][j] = alpha * v[l][j] + (T(1) - alpha) * c[j];
          u[j] = v[l][j];
          act[j] = 1;
          tr.rates[j] += v[l][j];
        }
      } else {
        detail::lif_layer_step<T>(params.lif, mode, c, v[l], refr[l], u, z, act);
        if (l + 1 == nl)
          for (std::size_t j = 0; j < n; ++j) tr.rates[j] += z[j];
      }
      prev = z;
    }
  }
  return tr;
}

/// Gradients in the order of CsnnParams::trainable().
template <std::floating_point T>
GradList<T> csnn_backward(const CsnnParams<T>& params, const CsnnTrace<T>& tr,
                          std::span<const T> grad_normalized) {
  const auto shapes = params.conv_shapes();
  const std::size_t nc = shapes.size(), nl = nc + 2, steps = tr.steps;
  if (grad_normalized.size() != params.n_out) throw std::invalid_argument("output gradient size mismatch");
  const std::size_t n_flat = params.flat_size();

  GradList<T> g;
  for (std::size_t l = 0; l < nc; ++l) {
    g.emplace_back(params.conv_w[l].size(), T(0));
    g.emplace_back(params.conv_b[l].size(), T(0));
  }
  g.emplace_back(params.fc_w.size(), T(0));
  g.emplace_back(params.fc_b.size(), T(0));
  g.emplace_back(params.out_w.size(), T(0));
  g.emplace_back(params.out_b.size(), T(0));
  auto& gw_fc = g[2 * nc];
  auto& gb_fc = g[2 * nc + 1];
  auto& gw_out = g[2 * nc + 2];
  auto& gb_out = g[2 * nc + 3];

  std::vector<T> fc_t(params.fc_w.size()), out_t(params.out_w.size());
  for (std::size_t i = 0; i < n_flat; ++i)
    for (std::size_t j = 0; j < params.n_fc; ++j) fc_t[j * n_flat + i] = params.fc_w[i * params.n_fc + j];
  for (std::size_t i = 0; i < params.n_fc; ++i)
    for (std::size_t j = 0; j < params.n_out; ++j)
      out_t[j * params.n_fc + i] = params.out_w[i * params.n_out + j];

  std::vector<std::vector<T>> gv(nl), gi(nl), dz(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    gv[l].assign(tr.sizes[l], T(0));
    gi[l].assign(tr.sizes[l], T(0));
    dz[l].assign(tr.sizes[l], T(0));
  }
  const T scale = T(1) / T(steps);
  for (std::size_t j = 0; j < params.n_out; ++j) dz[nl - 1][j] = grad_normalized[j] * scale;
  const bool leaky = params.readout == Readout::kLeakyIntegrator;
  const T alpha = params.lif.decay();
  const T beta = T(1) - alpha;

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t l = nl; l-- > 0;) {
      const std::size_t n = tr.sizes[l];
      const T* u = tr.u[l].data() + t * n;
      const T* z = tr.z[l].data() + t * n;
      const std::uint8_t* act = tr.active[l].data() + t * n;
      if (l + 1 == nl && leaky) {
        for (std::size_t j = 0; j < n; ++j) {
          const T gu = dz[l][j] + gv[l][j];
          gi[l][j] = beta * gu;
          gv[l][j] = alpha * gu;
        }
      } else {
        detail::lif_layer_backward(params.lif, n, u, z, act, dz[l].data(), gv[l].data(), gi[l].data());
      }
      const T* in = l == 0 ? tr.input.data() : tr.z[l - 1].data() + t * tr.sizes[l - 1];
      if (l + 1 == nl || l == nc) {
        const std::size_t n_in = l == nc ? n_flat : params.n_fc;
        auto& gw = l == nc ? gw_fc : gw_out;
        auto& gb = l == nc ? gb_fc : gb_out;
        const auto& wt = l == nc ? fc_t : out_t;
        for (std::size_t j = 0; j < n; ++j) gb[j] += gi[l][j];
        for (std::size_t i = 0; i < n_in; ++i) {
          if (in[i] == T(0)) continue;
          T* row = gw.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += in[i] * gi[l][j];
        }
        auto& d = dz[l - 1];
        std::fill(d.begin(), d.end(), T(0));
        for (std::size_t j = 0; j < n; ++j) {
          const T gj = gi[l][j];
          if (gj == T(0)) continue;
          const T* col = wt.data() + j * n_in;
          for (std::size_t i = 0; i < n_in; ++i) d[i] += col[i] * gj;
        }
      } else {
        const auto& s = shapes[l];
        auto& gb = g[2 * l + 1];
        for (std::size_t p = 0; p < s.out_h * s.out_w; ++p)
          for (std::size_t o = 0; o < s.out_c; ++o) gb[o] += gi[l][p * s.out_c + o];
        detail::conv_weight_grad(s, in, gi[l].data(), g[2 * l].data());
        if (l > 0) detail::conv_input_grad(s, params.conv_w[l].data(), gi[l].data(), dz[l - 1].data());
      }
    }
  }
  return g;
}

template <std::floating_point T>
LossGrad<T> loss_and_grad(const CsnnParams<T>& params, const TrainingSample<T>& sample) {
  const auto trace = csnn_forward(params, sample.input);
  LossGrad<T> out;
  out.output = trace.normalized_rates();
  out.loss = mse_loss<T>(out.output, sample.label);
  const auto dout = mse_grad<T>(out.output, sample.label);
  out.grads = csnn_backward(params, trace, std::span<const T>(dout));
  return out;
}

template <std::floating_point T>
std::vector<T> predict(const CsnnParams<T>& params, const PatternTensor<T>& input) {
  return csnn_forward(params, input).rates;
}

template <std::floating_point T>
std::vector<T> normalized_output(const CsnnParams<T>& params, const PatternTensor<T>& input) {
  return csnn_forward(params, input).normalized_rates();
}

}  // namespace mtpc

#endif  // MTPC_CSNN_HPP_
