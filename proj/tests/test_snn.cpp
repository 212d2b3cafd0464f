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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mtpc/azimuth.hpp"
#include "mtpc/csnn.hpp"
#include "mtpc/lif.hpp"
#include "mtpc/rsnn.hpp"
#include "mtpc/trainer.hpp"

namespace mtpc {
namespace {

std::vector<std::uint8_t> step(LifState<double>& s, std::vector<double> current, const LifParams<double>& p) {
  auto r = lif_step<double>(s, current, p);
  s = r.state;
  return r.spikes;
}

TEST(LifStep, FreeDecayClosedForm) {
  LifParams<double> p;
  p.tau_m = 7.0;
  p.threshold = 10.0;
  LifState<double> s(3);
  s.v = {0.5, -2.0, 9.0};
  const auto v0 = s.v;
  for (int k = 1; k <= 25; ++k) {
    step(s, {0, 0, 0}, p);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.v[i], v0[i] * std::exp(-k * p.dt / p.tau_m), 1e-12);
  }
}

TEST(LifStep, ConstantSubThresholdCurrentIsTheFixedPoint) {
  LifParams<double> p;
  p.tau_m = 5.0;
  LifState<double> s(1);
  for (int k = 0; k < 400; ++k) step(s, {0.8}, p);
  EXPECT_NEAR(s.v[0], 0.8, 1e-12);
}

TEST(LifStep, SpikeResetsAndNextStepStartsFromZero) {
  LifParams<double> p;
  p.tau_m = 4.0;
  p.refractory_steps = 0;
  LifState<double> s(1);
  s.v = {0.9};
  const double alpha = std::exp(-0.25);
  const double u = 0.9 * alpha + 5.0 * (1 - alpha);
  ASSERT_GE(u, 1.0);
  EXPECT_EQ(step(s, {5.0}, p)[0], 1);
  EXPECT_EQ(s.v[0], 0.0);
  step(s, {0.3}, p);
  EXPECT_NEAR(s.v[0], 0.3 * (1 - alpha), 1e-15);
}

TEST(LifStep, RefractoryIgnoresInput) {
  LifParams<double> p;
  p.tau_m = 1.0;
  p.refractory_steps = 1;
  LifState<double> s(1);
  std::vector<int> times;
  for (int t = 0; t < 40; ++t)
    if (step(s, {100.0}, p)[0]) times.push_back(t);
  ASSERT_GT(times.size(), 5u);
  for (std::size_t i = 1; i < times.size(); ++i) EXPECT_EQ(times[i] - times[i - 1], 2);
}

TEST(LifStep, RefractorySpacingUnderRandomDrive) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 4.0);
  for (int refr : {0, 1, 3}) {
    LifParams<double> p;
    p.tau_m = 3.0;
    p.refractory_steps = refr;
    LifState<double> s(16);
    std::vector<int> last(16, -1000);
    for (int t = 0; t < 500; ++t) {
      std::vector<double> c(16);
      for (auto& x : c) x = u(rng);
      const auto z = step(s, c, p);
      for (std::size_t i = 0; i < 16; ++i) {
        if (!z[i]) continue;
        EXPECT_GE(t - last[i], refr + 1);
        last[i] = t;
        EXPECT_EQ(s.v[i], 0.0);
      }
    }
  }
}

TEST(LifStep, Errors) {
  LifState<double> s(2);
  EXPECT_THROW(lif_step<double>(s, std::vector<double>{1.0}, {}), std::invalid_argument);
  EXPECT_THROW(lif_step<double>(s, std::vector<double>{1.0, std::nan("")}, {}), NumericalError);
  LifParams<double> bad;
  bad.tau_m = 0.0;
  EXPECT_THROW(lif_step<double>(s, std::vector<double>{1.0, 1.0}, bad), std::invalid_argument);
}

TEST(Surrogate, Values) {
  for (double th : {0.5, 1.0, 3.0}) {
    EXPECT_EQ(surrogate_grad(th, th), 1.0);
    EXPECT_EQ(surrogate_grad(0.0, th), 0.0);
    EXPECT_EQ(surrogate_grad(2.0 * th, th), 0.0);
    EXPECT_DOUBLE_EQ(surrogate_grad(1.5 * th, th), 0.5);
    EXPECT_DOUBLE_EQ(surrogate_grad(0.25 * th, th), 0.25);
    EXPECT_EQ(surrogate_grad(-th, th), 0.0);
    EXPECT_EQ(surrogate_grad(5.0 * th, th), 0.0);
  }
}

TEST(Surrogate, SupportAndSlopes) {
  const double th = 1.3;
  for (double v = -3.0; v <= 6.0; v += 0.01) {
    const double g = surrogate_grad(v, th);
    EXPECT_EQ(g > 0.0, v > 0.0 && v < 2.0 * th) << v;
    const double h = 1e-6;
    if (std::abs(v - th) > 2 * h && v > 2 * h && v < 2 * th - 2 * h) {
      const double slope = (surrogate_grad(v + h, th) - surrogate_grad(v - h, th)) / (2 * h);
      EXPECT_NEAR(std::abs(slope), 1.0 / th, 1e-6);
      EXPECT_EQ(slope > 0, v < th);
    }
    // The relaxed spike is its antiderivative.
    if (v > -2.0 && v < 5.0) {
      const double d = (relaxed_spike(v + h, th) - relaxed_spike(v - h, th)) / (2 * h);
      EXPECT_NEAR(d, g, 1e-6);
    }
  }
}

PatternTensor<double> random_pattern(std::size_t p, std::size_t c, std::size_t d, std::uint64_t seed,
                                     double density = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PatternTensor<double> x{p, c, d, std::vector<double>(p * c * d)};
  for (auto& v : x.values) v = u(rng) < density ? double(1 + rng() % 4) : 0.0;
  return x;
}

RsnnParams<double> small_rsnn(std::uint64_t seed, std::size_t ni = 8, std::size_t nh = 12, std::size_t no = 10) {
  LifParams<double> lif;
  lif.tau_m = 4.0;
  auto m = RsnnParams<double>::init(ni, nh, no, seed, lif);
  m.input_scale = 2.0;
  for (auto& w : m.w_rec) w *= 2.0;
  for (auto& w : m.w_out) w *= 4.0;
  return m;
}

TEST(Rsnn, ZeroInputZeroRates) {
  auto m = small_rsnn(3);
  const auto x = random_pattern(6, 8, 5, 1, 0.0);
  for (auto readout : {Readout::kSpiking, Readout::kLeakyIntegrator}) {
    m.readout = readout;
    const auto tr = rsnn_forward(m, InputSequence<double>::tandem(x));
    EXPECT_EQ(tr.steps, 30u);
    for (double r : tr.rates) EXPECT_EQ(r, 0.0);
  }
}

TEST(Rsnn, TandemOrder) {
  const auto x = random_pattern(6, 40, 51, 2);
  const auto seq = InputSequence<double>::tandem(x);
  ASSERT_EQ(seq.steps, 306u);
  ASSERT_EQ(seq.n_in, 40u);
  for (std::size_t p = 0; p < 6; ++p)
    for (std::size_t k = 0; k < 51; ++k)
      for (std::size_t c = 0; c < 40; ++c) ASSERT_EQ(seq.step(p * 51 + k)[c], x.at(p, c, k));
}

TEST(Rsnn, DeterministicAndActive) {
  const auto x = random_pattern(6, 8, 5, 4);
  const auto a = rsnn_forward(small_rsnn(9), InputSequence<double>::tandem(x));
  const auto b = rsnn_forward(small_rsnn(9), InputSequence<double>::tandem(x));
  EXPECT_EQ(a.rates, b.rates);
  EXPECT_EQ(a.z_hidden, b.z_hidden);
  EXPECT_GT(std::accumulate(a.z_hidden.begin(), a.z_hidden.end(), 0.0), 0.0);
}

TEST(Rsnn, Causality) {
  const auto m = small_rsnn(5);
  for (std::size_t onset : {0u, 7u, 19u}) {
    PatternTensor<double> x{6, 8, 5, std::vector<double>(6 * 8 * 5, 0.0)};
    const std::size_t p = onset / 5, k = onset % 5;
    for (std::size_t c = 0; c < 8; ++c) x.values[(p * 8 + c) * 5 + k] = 3.0;
    const auto tr = rsnn_forward(m, InputSequence<double>::tandem(x));
    for (std::size_t t = 0; t < onset; ++t)
      for (std::size_t h = 0; h < m.n_hidden; ++h) {
        EXPECT_EQ(tr.u_hidden[t * m.n_hidden + h], 0.0);
        EXPECT_EQ(tr.z_hidden[t * m.n_hidden + h], 0.0);
      }
    double after = 0.0;
    for (std::size_t h = 0; h < m.n_hidden; ++h) after += std::abs(tr.u_hidden[onset * m.n_hidden + h]);
    EXPECT_GT(after, 0.0);
  }
}

TEST(Rsnn, HiddenPermutationEquivariance) {
  // Dyadic weights keep every sum exact, so reordering cannot round.
  auto m = small_rsnn(6);
  std::mt19937_64 rng(6);
  auto dyadic = [&](std::vector<double>& w) {
    for (auto& v : w) v = double(int(rng() % 257) - 128) / 64.0;
  };
  dyadic(m.w_in);
  dyadic(m.w_rec);
  dyadic(m.w_out);
  dyadic(m.b_hidden);
  std::vector<std::size_t> perm(m.n_hidden);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto q = m;
  const std::size_t nh = m.n_hidden, ni = m.n_in, no = m.n_out;
  for (std::size_t h = 0; h < nh; ++h) {
    const std::size_t g = perm[h];
    q.b_hidden[g] = m.b_hidden[h];
    for (std::size_t i = 0; i < ni; ++i) q.w_in[i * nh + g] = m.w_in[i * nh + h];
    for (std::size_t j = 0; j < no; ++j) q.w_out[g * no + j] = m.w_out[h * no + j];
    for (std::size_t h2 = 0; h2 < nh; ++h2) q.w_rec[g * nh + perm[h2]] = m.w_rec[h * nh + h2];
  }
  const auto x = InputSequence<double>::tandem(random_pattern(6, 8, 5, 7));
  for (auto readout : {Readout::kSpiking, Readout::kLeakyIntegrator}) {
    m.readout = q.readout = readout;
    EXPECT_EQ(rsnn_forward(m, x).rates, rsnn_forward(q, x).rates);
  }
}

TEST(Rsnn, RateBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = small_rsnn(seed);
    for (auto& b : m.b_out) b = 5.0;
    const auto tr = rsnn_forward(m, InputSequence<double>::tandem(random_pattern(6, 8, 5, seed, 0.8)));
    for (double r : tr.rates) {
      EXPECT_LE(r, double(tr.steps));
      EXPECT_LE(r, std::ceil(double(tr.steps) / 2.0));  // one refractory step
    }
  }
}

TEST(Rsnn, DimensionMismatch) {
  const auto m = small_rsnn(1);
  EXPECT_THROW(rsnn_forward(m, InputSequence<double>::tandem(random_pattern(6, 7, 5, 1))),
               std::invalid_argument);
}

// Central differences of the relaxed network, with the loss evaluated on the
// same relaxed forward pass.
template <class Model, class Forward>
void check_gradient(Model m, Forward forward, const GradList<double>& analytic) {
  auto tensors = m.trainable();
  ASSERT_EQ(tensors.size(), analytic.size());
  const double h = 1e-6;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    ASSERT_EQ(tensors[k].data.size(), analytic[k].size());
    for (std::size_t i = 0; i < tensors[k].data.size(); ++i) {
      double& w = tensors[k].data[i];
      const double w0 = w;
      w = w0 + h;
      const double lp = forward(m);
      w = w0 - h;
      const double lm = forward(m);
      w = w0;
      const double fd = (lp - lm) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic[k][i]), 1e-3});
      EXPECT_LE(std::abs(fd - analytic[k][i]) / scale, 1e-4) << tensors[k].name << "[" << i << "]";
    }
  }
}

TEST(Rsnn, BpttMatchesFiniteDifferencesOnRelaxedNet) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (auto readout : {Readout::kSpiking, Readout::kLeakyIntegrator}) {
      LifParams<double> lif;
      lif.tau_m = 2.0;
      auto m = RsnnParams<double>::init(2, 3, 2, seed, lif);
      m.readout = readout;
      std::mt19937_64 rng(seed * 77);
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      for (auto& b : m.b_hidden) b = u(rng);
      for (auto& b : m.b_out) b = u(rng);
      for (auto& w : m.w_out) w *= 2.0;
      InputSequence<double> seq{2, 4, std::vector<double>(8)};
      for (auto& v : seq.values) v = 2.0 * (u(rng) + 0.5);
      const std::vector<double> label = {u(rng) + 0.5, u(rng) + 0.5};
      auto loss = [&](const RsnnParams<double>& p) {
        const auto o = rsnn_forward(p, seq, SpikeMode::kRelaxed).normalized_rates();
        return mse_loss<double>(o, label);
      };
      const auto tr = rsnn_forward(m, seq, SpikeMode::kRelaxed);
      const auto o = tr.normalized_rates();
      const auto g = mse_grad<double>(o, label);
      const auto analytic = rsnn_backward(m, seq, tr, std::span<const double>(g));
      SCOPED_TRACE("seed " + std::to_string(seed));
      check_gradient(m, loss, analytic);
    }
  }
}

CsnnParams<double> tiny_csnn(std::uint64_t seed, std::size_t steps = 3) {
  LifParams<double> lif;
  lif.tau_m = 2.0;
  auto m = CsnnParams<double>::init(2, 5, 4, seed, lif, {3, 4}, 5, 3);
  m.steps = steps;
  m.input_norm = 2.0;
  return m;
}

TEST(Csnn, BpttMatchesFiniteDifferencesOnRelaxedNet) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = tiny_csnn(seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& b : m.conv_b)
      for (auto& v : b) v = u(rng) + 0.5;
    for (auto& v : m.fc_b) v = u(rng) + 0.5;
    for (auto& v : m.out_b) v = u(rng) + 0.5;
    const auto x = random_pattern(2, 4, 5, seed, 0.7);
    const std::vector<double> label = {0.2, 0.9, 0.5};
    auto loss = [&](const CsnnParams<double>& p) {
      return mse_loss<double>(csnn_forward(p, x, SpikeMode::kRelaxed).normalized_rates(), label);
    };
    const auto tr = csnn_forward(m, x, SpikeMode::kRelaxed);
    const auto g = mse_grad<double>(tr.normalized_rates(), label);
    SCOPED_TRACE("seed " + std::to_string(seed));
    check_gradient(m, loss, csnn_backward(m, tr, std::span<const double>(g)));
  }
}

TEST(Csnn, StageSizes) {
  const auto m = CsnnParams<float>::init(6, 51, 40, 1);
  const auto s = m.conv_shapes();
  ASSERT_EQ(s.size(), 4u);
  const std::size_t h[] = {26, 13, 7, 4}, w[] = {20, 10, 5, 3}, c[] = {12, 24, 48, 96};
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_EQ(s[l].out_h, h[l]);
    EXPECT_EQ(s[l].out_w, w[l]);
    EXPECT_EQ(s[l].out_c, c[l]);
    EXPECT_EQ(s[l].out_h, (s[l].in_h + 2 - 3) / 2 + 1);
  }
  EXPECT_EQ(m.flat_size(), 4u * 3u * 96u);
}

TEST(Csnn, InputNormalizationAndShapeErrors) {
  auto m = CsnnParams<double>::init(2, 5, 4, 1, {}, {3}, 4, 3);
  m.input_norm = 4.0;
  auto x = random_pattern(2, 4, 5, 3, 1.0);
  x.values[0] = 100.0;
  const auto img = csnn_input(m, x);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < 5; ++k)
        EXPECT_EQ(img[(k * 4 + c) * 2 + p], std::min(x.at(p, c, k) / 4.0, 1.0));
  EXPECT_THROW(csnn_forward(m, random_pattern(2, 5, 5, 1)), std::invalid_argument);
  std::vector<PatternTensor<double>> set(20, random_pattern(1, 1, 5, 0, 0.0));
  for (std::size_t i = 0; i < 20; ++i) set[i].values = {double(i + 1), 0, 0, 0, 0};
  // 100 entries, 80 of them zero; the 95th smallest is the count 15.
  EXPECT_EQ(percentile95_count<double>(set), 15.0);
}

TEST(Csnn, ZeroInputZeroRates) {
  const auto m = tiny_csnn(2);
  const auto tr = csnn_forward(m, random_pattern(2, 4, 5, 0, 0.0));
  for (double r : tr.rates) EXPECT_EQ(r, 0.0);
}

TEST(Csnn, DoublingStepsExtendsTheCount) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    LifParams<double> lif;
    lif.tau_m = 2.0;
    auto a = CsnnParams<double>::init(6, 51, 40, seed, lif);
    for (auto& b : a.conv_b)
      for (auto& v : b) v = 1.2;
    for (auto& v : a.fc_b) v = 1.2;
    for (auto& v : a.out_b) v = 1.2;
    a.steps = 10;
    auto b = a;
    b.steps = 20;
    const auto x = random_pattern(6, 40, 51, seed, 0.4);
    const auto ra = csnn_forward(a, x).rates, rb = csnn_forward(b, x).rates;
    double total = 0.0;
    for (std::size_t j = 0; j < ra.size(); ++j) {
      EXPECT_GE(rb[j], ra[j]);
      EXPECT_LE(rb[j], ra[j] + 10.0);
      EXPECT_LE(rb[j], 20.0);
      total += rb[j];
    }
    EXPECT_GT(total, 0.0);
  }
}

TrainingSample<double> toy_sample(double az, std::size_t hot) {
  TrainingSample<double> s;
  s.input = PatternTensor<double>{1, 4, 8, std::vector<double>(32, 0.0)};
  for (std::size_t k = 0; k < 8; ++k) s.input.values[hot * 8 + k] = 3.0;
  s.label = gaussian_label<double>(az);
  s.azimuth = az;
  return s;
}

TEST(Bptt, ZeroLearningRateLeavesParametersUnchanged) {
  auto m = small_rsnn(1, 4, 16, 360);
  const auto before = m;
  AdamState<double> opt;
  std::vector<TrainingSample<double>> batch = {toy_sample(90, 0), toy_sample(270, 2)};
  bptt_update(m, std::span<const TrainingSample<double>>(batch), opt, 0.0);
  EXPECT_EQ(m.w_in, before.w_in);
  EXPECT_EQ(m.w_rec, before.w_rec);
  EXPECT_EQ(m.w_out, before.w_out);
  EXPECT_EQ(m.b_hidden, before.b_hidden);
  EXPECT_EQ(m.b_out, before.b_out);
}

TEST(Bptt, ToyProblemLossDecreases) {
  auto m = small_rsnn(2, 4, 16, 360);
  for (auto& b : m.b_out) b = 0.3;
  AdamState<double> opt;
  std::vector<TrainingSample<double>> batch = {toy_sample(90, 0), toy_sample(270, 2)};
  std::vector<double> loss;
  for (int i = 0; i < 50; ++i) loss.push_back(bptt_update(m, std::span<const TrainingSample<double>>(batch), opt, 1e-2));
  const double first = std::accumulate(loss.begin(), loss.begin() + 10, 0.0) / 10.0;
  const double last = std::accumulate(loss.end() - 10, loss.end(), 0.0) / 10.0;
  EXPECT_LT(last, first);
  std::vector<double> ma;
  for (std::size_t i = 10; i <= loss.size(); i += 10)
    ma.push_back(std::accumulate(loss.begin() + long(i) - 10, loss.begin() + long(i), 0.0));
  for (std::size_t i = 1; i < ma.size(); ++i) EXPECT_LT(ma[i], ma[i - 1]) << i;
}

TEST(Bptt, NonFiniteLeavesParametersUnchanged) {
  auto m = small_rsnn(3, 4, 16, 360);
  const auto before = m;
  AdamState<double> opt;
  auto bad_label = toy_sample(90, 0);
  bad_label.label[5] = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrainingSample<double>> batch = {bad_label};
  EXPECT_THROW(bptt_update(m, std::span<const TrainingSample<double>>(batch), opt, 1e-2), NumericalError);
  auto bad_input = toy_sample(90, 0);
  bad_input.input.values[3] = std::numeric_limits<double>::infinity();
  batch = {bad_input};
  EXPECT_THROW(bptt_update(m, std::span<const TrainingSample<double>>(batch), opt, 1e-2), NumericalError);
  EXPECT_EQ(m.w_in, before.w_in);
  EXPECT_EQ(m.w_rec, before.w_rec);
  EXPECT_EQ(m.w_out, before.w_out);
  EXPECT_EQ(opt.step, 0);
  EXPECT_THROW(bptt_update(m, std::span<const TrainingSample<double>>(), opt, 1e-2), std::invalid_argument);
}

TEST(Bptt, ThreadCountDoesNotChangeTheUpdate) {
  std::vector<TrainingSample<double>> batch;
  for (int i = 0; i < 7; ++i) batch.push_back(toy_sample(40.0 * i, std::size_t(i % 4)));
  auto a = small_rsnn(4, 4, 16, 360), b = a;
  AdamState<double> oa, ob;
  for (int r = 0; r < 3; ++r) {
    bptt_update(a, std::span<const TrainingSample<double>>(batch), oa, 1e-2, 1);
    bptt_update(b, std::span<const TrainingSample<double>>(batch), ob, 1e-2, 3);
  }
  EXPECT_EQ(a.w_in, b.w_in);
  EXPECT_EQ(a.w_rec, b.w_rec);
  EXPECT_EQ(a.w_out, b.w_out);
  EXPECT_EQ(a.b_out, b.b_out);
}

TEST(Bptt, CsnnUpdateIsDeterministic) {
  auto a = tiny_csnn(3), b = tiny_csnn(3);
  TrainingSample<double> s;
  s.input = random_pattern(2, 4, 5, 1, 0.6);
  s.label = {0.1, 0.8, 0.3};
  std::vector<TrainingSample<double>> batch = {s, s};
  AdamState<double> oa, ob;
  bptt_update(a, std::span<const TrainingSample<double>>(batch), oa, 1e-2, 1);
  bptt_update(b, std::span<const TrainingSample<double>>(batch), ob, 1e-2, 2);
  EXPECT_EQ(a.fc_w, b.fc_w);
  EXPECT_EQ(a.conv_w, b.conv_w);
}

}  // namespace
}  // namespace mtpc
