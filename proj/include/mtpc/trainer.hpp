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

// Mini-batch training through time with surrogate gradients.
//
// A model type M plugs in by providing
//
//   M::Scalar
//   std::vector<TensorRef<Scalar>> M::trainable()
//   LossGrad<Scalar> loss_and_grad(const M&, const TrainingSample<Scalar>&)
//   std::vector<Scalar> predict(const M&, const PatternTensor<Scalar>&)
//   std::vector<Scalar> normalized_output(const M&, const PatternTensor<Scalar>&)
//
// Per-sample gradients are summed in sample order regardless of the number
// of worker threads, so updates are reproducible bit for bit.

#ifndef MTPC_TRAINER_HPP_
#define MTPC_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mtpc/azimuth.hpp"
#include "mtpc/error.hpp"
#include "mtpc/network.hpp"
#include "mtpc/rsnn.hpp"

namespace mtpc {

template <std::floating_point T>
struct TrainingSample {
  PatternTensor<T> input;
  std::vector<T> label;  // 360-bin target curve
  double azimuth = 0.0;
};

template <std::floating_point T>
struct LossGrad {
  T loss = T(0);
  GradList<T> grads;
  std::vector<T> output;  // normalized rates
};

/// Adaptive moment estimation with bias correction.
template <std::floating_point T>
struct AdamState {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  long step = 0;
  GradList<T> m;
  GradList<T> v;

  void apply(std::vector<TensorRef<T>> params, const GradList<T>& grads, T lr) {
    if (m.empty()) {
      for (const auto& p : params) {
        m.emplace_back(p.data.size(), T(0));
        v.emplace_back(p.data.size(), T(0));
      }
    }
    if (m.size() != params.size() || grads.size() != params.size()) {
      throw std::invalid_argument("optimizer state does not match parameters");
    }
    ++step;
    const T c1 = T(1) - std::pow(beta1, T(step));
    const T c2 = T(1) - std::pow(beta2, T(step));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k].data;
      const auto& g = grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[k][i] = beta1 * m[k][i] + (T(1) - beta1) * g[i];
        v[k][i] = beta2 * v[k][i] + (T(1) - beta2) * g[i] * g[i];
        const T mh = m[k][i] / c1;
        const T vh = v[k][i] / c2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
      }
    }
  }
};

template <std::floating_point T>
LossGrad<T> loss_and_grad(const RsnnParams<T>& params, const TrainingSample<T>& sample) {
  const auto seq = InputSequence<T>::tandem(sample.input);
  const auto trace = rsnn_forward(params, seq);
  LossGrad<T> out;
  out.output = trace.normalized_rates();
  out.loss = mse_loss<T>(out.output, sample.label);
  const auto dout = mse_grad<T>(out.output, sample.label);
  out.grads = rsnn_backward(params, seq, trace, std::span<const T>(dout));
  return out;
}

template <std::floating_point T>
std::vector<T> predict(const RsnnParams<T>& params, const PatternTensor<T>& input) {
  return rsnn_forward(params, InputSequence<T>::tandem(input)).rates;
}

/// Rates divided by the number of simulated steps, as seen by the loss.
template <std::floating_point T>
std::vector<T> normalized_output(const RsnnParams<T>& params, const PatternTensor<T>& input) {
  return rsnn_forward(params, InputSequence<T>::tandem(input)).normalized_rates();
}

/// One optimizer update from the mean gradient of `batch`. Returns the mean
/// loss. A non-finite loss or gradient raises NumericalError and leaves the
/// parameters and optimizer state untouched.
template <class Model, std::floating_point T = typename Model::Scalar>
T bptt_update(Model& model, std::span<const TrainingSample<T>> batch, AdamState<T>& opt, T lr,
              unsigned threads = 1) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<LossGrad<T>> results(batch.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, unsigned(batch.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) results[i] = loss_and_grad(model, batch[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            results[i] = loss_and_grad(model, batch[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  GradList<T> total = results.front().grads;
  T loss = results.front().loss;
  for (std::size_t i = 1; i < results.size(); ++i) {
    loss += results[i].loss;
    for (std::size_t k = 0; k < total.size(); ++k) {
      const auto& g = results[i].grads[k];
      for (std::size_t j = 0; j < g.size(); ++j) total[k][j] += g[j];
    }
  }
  const T inv = T(1) / T(batch.size());
  loss *= inv;
  for (auto& g : total)
    for (auto& x : g) x *= inv;
  if (!std::isfinite(loss) || !all_finite(total)) throw NumericalError("non-finite loss or gradient");
  opt.apply(model.trainable(), total, lr);
  return loss;
}

}  // namespace mtpc

#endif  // MTPC_TRAINER_HPP_
