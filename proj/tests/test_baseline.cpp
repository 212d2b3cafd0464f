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
#include <random>

#include "mtpc/array_sim.hpp"
#include "mtpc/gcc_phat.hpp"

namespace mtpc {
namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

TEST(GccPhat, IdenticalInputsGiveZero) {
  const auto x = noise(2048, 1);
  const auto e = gcc_phat(x, x, 16000.0, 0.002);
  EXPECT_EQ(e.peak_lag, 0);
  EXPECT_NEAR(e.delay, 0.0, 1e-12);
  EXPECT_GE(e.confidence, 1.0);
}

TEST(GccPhat, IntegerShift) {
  // A burst surrounded by silence, so the shift loses no samples at the edges.
  const auto burst = noise(1000, 2);
  for (int shift : {5, -5, 12, -1}) {
    std::vector<double> x1(4096, 0.0), x2(4096, 0.0);
    for (std::size_t n = 0; n < burst.size(); ++n) {
      x1[1500 + n] = burst[n];
      x2[std::size_t(1500 + long(n) + shift)] = burst[n];
    }
    const auto e = gcc_phat(x1, x2, 16000.0, 0.002);
    EXPECT_EQ(e.peak_lag, shift);
    EXPECT_NEAR(e.delay, shift / 16000.0, 1e-9) << shift;
  }
}

TEST(GccPhat, Antisymmetry) {
  const auto g = MicArrayGeometry::square(0.25);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    SourceSpec s;
    s.azimuth_deg = double(rng() % 360);
    s.distance_m = 1.5;
    s.signal = WhiteNoiseBurst{0.1};
    s.seed = trial;
    const auto clip = add_noise(synthesize_clip(g, s, 0.1), 10.0, WhiteNoise{}, trial);
    const auto ab = gcc_phat(clip.samples[0], clip.samples[2], 16000.0, 0.002);
    const auto ba = gcc_phat(clip.samples[2], clip.samples[0], 16000.0, 0.002);
    EXPECT_NEAR(ab.delay, -ba.delay, 1e-7);
  }
}

TEST(GccPhat, ScaleInvariance) {
  const auto x1 = noise(2048, 4);
  auto x2 = noise(2048, 5);
  for (std::size_t n = 3; n < 2048; ++n) x2[n] += 2.0 * x1[n - 3];
  const auto ref = gcc_phat(x1, x2, 16000.0, 0.002);
  for (double a : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> y1(x1), y2(x2);
    for (auto& v : y1) v *= a;
    for (auto& v : y2) v *= 1.0 / a + 0.25;
    const auto e = gcc_phat(y1, y2, 16000.0, 0.002);
    EXPECT_EQ(e.peak_lag, ref.peak_lag);
    EXPECT_NEAR(e.delay, ref.delay, 1e-9);
  }
}

TEST(GccPhat, Errors) {
  const std::vector<double> zero(1024, 0.0);
  EXPECT_THROW(gcc_phat(zero, zero, 16000.0, 0.002), DataError);
  const auto x = noise(1024, 6);
  EXPECT_THROW(gcc_phat(x, std::vector<double>(1000, 1.0), 16000.0, 0.002), std::invalid_argument);
  EXPECT_THROW(gcc_phat(std::vector<double>(x.begin(), x.begin() + 40), std::vector<double>(40, 1.0), 16000.0,
                        0.002),
               std::invalid_argument);
}

TEST(GccPhat, SimulatedPairsAgreeWithGeometry) {
  const auto g = MicArrayGeometry::square(0.25);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> az(0.0, 360.0);
  const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 1}, {0, 2}, {1, 3}};
  int hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SourceSpec s;
    s.azimuth_deg = az(rng);
    s.distance_m = 1.0 + 0.5 * double(trial % 2);
    s.signal = WhiteNoiseBurst{0.1};
    s.seed = 100 + trial;
    const auto clip = add_noise(synthesize_clip(g, s, 0.1), 20.0, WhiteNoise{}, 500 + trial);
    const auto pr = pairs[std::size_t(trial) % pairs.size()];
    const auto e = gcc_phat(clip.samples[pr.first], clip.samples[pr.second], 16000.0, 0.002);
    // Positive delay means the second microphone hears the source later.
    if (std::abs(e.delay + analytic_tdoa(g, s, pr)) <= 1.0 / 16000.0) ++hits;
  }
  EXPECT_GE(hits, 99);
}

}  // namespace
}  // namespace mtpc
