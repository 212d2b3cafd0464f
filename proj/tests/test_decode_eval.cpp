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
#include <set>

#include "mtpc/azimuth.hpp"
#include "mtpc/experiment.hpp"

namespace mtpc {
namespace {

TEST(GaussianLabel, ShapeAndClosedForm) {
  for (double sigma : {2.0, 8.0, 30.0}) {
    const auto l = gaussian_label<double>(0.0, sigma);
    ASSERT_EQ(l.size(), 360u);
    EXPECT_EQ(l[0], 1.0);
    for (int d = 1; d < 180; ++d) EXPECT_EQ(l[std::size_t(d)], l[std::size_t(360 - d)]);
    for (double v : l) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NEAR(gaussian_label<double>(100.0)[108], std::exp(-0.5), 1e-15);
  EXPECT_NEAR(gaussian_label<double>(100.0)[92], 0.6065306597, 1e-10);
}

TEST(GaussianLabel, RotationIsACyclicShift) {
  const auto base = gaussian_label<double>(17.0, 8.0);
  for (int r : {1, 45, 200, 342}) {
    const auto rot = gaussian_label<double>(17.0 + r < 360 ? 17.0 + r : 17.0 + r - 360, 8.0);
    for (std::size_t i = 0; i < 360; ++i) EXPECT_EQ(rot[(i + std::size_t(r)) % 360], base[i]);
  }
}

TEST(GaussianLabel, Errors) {
  EXPECT_THROW(gaussian_label<double>(360.0), std::invalid_argument);
  EXPECT_THROW(gaussian_label<double>(-1.0), std::invalid_argument);
  EXPECT_THROW(gaussian_label<double>(10.0, 0.0), std::invalid_argument);
}

TEST(DecodePeak, Examples) {
  std::vector<double> r(360, 0.0);
  r[90] = 1.0;
  EXPECT_EQ(decode_peak(r), 90);
  r.assign(360, 0.0);
  r[0] = r[2] = 3.0;
  EXPECT_EQ(decode_peak(r), 1);
  r.assign(360, 0.0);
  r[359] = r[1] = 2.0;
  EXPECT_EQ(decode_peak(r), 0);
  r.assign(360, 0.0);
  r[10] = r[190] = 1.0;  // no mean direction
  EXPECT_EQ(decode_peak(r), 10);
  EXPECT_THROW(decode_peak(std::vector<double>(360, 0.0)), DataError);
  EXPECT_THROW(decode_peak(std::vector<double>(359, 1.0)), std::invalid_argument);
}

TEST(DecodePeak, GaussianCurveAgainstScan) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    const double az = double(rng() % 360) + 0.3 * double(rng() % 2);
    const auto curve = gaussian_label<double>(az, 8.0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < 360; ++i)
      if (curve[i] > curve[best]) best = i;
    EXPECT_EQ(decode_peak(curve), int(best));
  }
  EXPECT_EQ(decode_peak(gaussian_label<double>(123.0)), 123);
}

TEST(DecodePeak, MonotoneTransformInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> r(360);
    for (auto& v : r) v = double(rng() % 20);
    std::vector<double> a(360), b(360);
    for (std::size_t i = 0; i < 360; ++i) {
      a[i] = std::exp(r[i]) + 1.0;
      b[i] = 3.0 * r[i] * r[i] * r[i] + 7.0;
    }
    const int d = decode_peak(r);
    EXPECT_EQ(decode_peak(a), d);
    EXPECT_EQ(decode_peak(b), d);
  }
}

TEST(Mae, CircularAndSymmetric) {
  const std::vector<double> x = {0, 90, 359.5, 180};
  EXPECT_EQ(mae(x, x), 0.0);
  EXPECT_EQ(mae(std::vector<double>{359}, std::vector<double>{0}), 1.0);
  EXPECT_EQ(mae(std::vector<double>{0}, std::vector<double>{180}), 180.0);
  EXPECT_THROW(mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(mae(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Mae, MatchesScalarLoop) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 360.0);
  std::vector<double> a(1000), b(1000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(a[i] - b[i]);
    if (d > 180.0) d = 360.0 - d;
    acc += d;
  }
  EXPECT_EQ(mae(a, b), acc / 1000.0);
  EXPECT_EQ(mae(a, b), mae(b, a));
}

TEST(MseLoss, Examples) {
  const auto l = gaussian_label<double>(40.0);
  EXPECT_EQ(mse_loss<double>(l, l), 0.0);
  auto o = l;
  for (auto& v : o) v += 1.0;
  EXPECT_NEAR(mse_loss<double>(o, l), 1.0, 1e-15);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : o) v = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < 360; ++i) acc += (l[i] - o[i]) * (l[i] - o[i]);
  EXPECT_NEAR(mse_loss<double>(o, l), acc / 360.0, 1e-12);
  const auto g = mse_grad<double>(o, l);
  for (std::size_t i = 0; i < 360; ++i) EXPECT_NEAR(g[i], 2.0 * (o[i] - l[i]) / 360.0, 1e-15);
  EXPECT_THROW(mse_loss<double>(std::vector<double>(3), std::vector<double>(4)), std::invalid_argument);
}

TEST(EvalReport, OverallMatchesRawPairs) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 360.0);
  for (double bin : {5.0, 1.0}) {
    EvalReport rep(bin);
    EXPECT_EQ(rep.counts.size(), std::size_t(360.0 / bin));
    for (int i = 0; i < 500; ++i) {
      const double label = double(rng() % 72) * 5.0;
      if (i % 50 == 0) {
        rep.add(std::nullopt, label);
      } else {
        rep.add(u(rng), label);
      }
    }
    EXPECT_EQ(rep.silent, 10u);
    EXPECT_NEAR(rep.overall_mae(), mae(rep.estimates, rep.labels), 1e-12);
    double weighted = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < rep.counts.size(); ++b) {
      weighted += rep.bin_mae(b) * double(rep.counts[b]);
      n += rep.counts[b];
    }
    EXPECT_EQ(n, 500u);
    EXPECT_NEAR(weighted / double(n), rep.overall_mae(), 1e-12);
  }
}

TEST(EvalReport, PerfectPosteriorScoresZero) {
  EvalReport rep;
  for (int a = 0; a < 72; ++a) rep.add(double(decode_peak(gaussian_label<double>(a * 5.0))), a * 5.0);
  EXPECT_EQ(rep.overall_mae(), 0.0);
  const auto csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "azimuth_deg,n,mae_deg");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 73);
}

TEST(EvalReport, SilentCountsAsOpposite) {
  EvalReport rep;
  rep.add(std::nullopt, 350.0);
  EXPECT_EQ(rep.overall_mae(), 180.0);
  EXPECT_EQ(rep.estimates[0], 170.0);
}

DatasetConfig tiny_dataset() {
  DatasetConfig cfg;
  cfg.azimuth_count = 4;
  cfg.azimuth_step = 90.0;
  cfg.windows_per_azimuth = 20;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  return cfg;
}

TEST(Dataset, PlanCoversEveryCellWithDisjointSplits) {
  const auto cfg = tiny_dataset();
  const auto plans = plan_clips(cfg);
  EXPECT_EQ(plans.size(), 4u * 2u * 2u * 2u);
  int train = 0, test = 0;
  std::set<std::uint64_t> seeds;
  for (const auto& p : plans) {
    (p.train ? train : test) += p.windows;
    seeds.insert(p.seed);
  }
  EXPECT_EQ(seeds.size(), plans.size());
  EXPECT_EQ(train + test, 4 * 20);
  EXPECT_EQ(train, 4 * 4 * 4);  // 5 windows per cell, 4 of them for training
}

TEST(Dataset, BuildIsDeterministicAndLabelled) {
  const auto cfg = tiny_dataset();
  const auto a = build_dataset(cfg, {});
  const auto b = build_dataset(cfg, {});
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].azimuth, b.train[i].azimuth);
    for (std::size_t q = 0; q < 6; ++q) EXPECT_EQ(a.train[i].pattern.patterns[q].counts, b.train[i].pattern.patterns[q].counts);
  }
  const auto samples = to_samples<float>(a.train, 8.0);
  for (const auto& s : samples) EXPECT_EQ(decode_peak(s.label), int(s.azimuth));
}

TEST(Dataset, InfiniteSnrMatchesTheCleanClip) {
  auto cfg = tiny_dataset();
  const auto plan = plan_clips(cfg).front();
  const auto noisy = render_clip(cfg, plan);
  const auto clean = synthesize_clip(cfg.geometry(), source_for(plan),
                                     cfg.window_s + cfg.stride_s * double(plan.windows - 1) + 1e-9);
  EXPECT_EQ(noisy.samples, clean.samples);
}

TEST(SplitValidation, PartitionsDeterministically) {
  std::vector<int> all(100);
  std::iota(all.begin(), all.end(), 0);
  const auto [tr, va] = split_validation(all, 0.1, 3);
  EXPECT_EQ(va.size(), 10u);
  EXPECT_EQ(tr.size(), 90u);
  std::set<int> seen(tr.begin(), tr.end());
  seen.insert(va.begin(), va.end());
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(split_validation(all, 0.1, 3).second, va);
  EXPECT_EQ(split_validation(all, 0.0, 3).first.size(), 100u);
}

TEST(Training, RepeatedRunsAreIdentical) {
  const auto data = build_dataset(tiny_dataset(), {});
  const auto train = to_samples<float>(data.train, 8.0);
  const auto test = to_samples<float>(data.test, 8.0);
  ModelConfig mc;
  mc.hidden = 8;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  const auto a = train_any(make_model(mc, train, 1), train, test, tc);
  const auto b = train_any(make_model(mc, train, 1), train, test, tc);
  EXPECT_EQ(encode_checkpoint(to_checkpoint(a.best)), encode_checkpoint(to_checkpoint(b.best)));
  ASSERT_EQ(a.log.size(), 4u);
  EXPECT_TRUE(std::isnan(a.log[0].mae_deg));
  EXPECT_EQ(a.log[1].split, "validation");
  const auto ra = evaluate_any(a.best, test), rb = evaluate_any(b.best, test);
  EXPECT_EQ(ra.estimates, rb.estimates);
  EXPECT_EQ(ra.size(), test.size());
}

TEST(Training, DefaultCsnnSpikesThroughEveryLayer) {
  const auto data = build_dataset(tiny_dataset(), {});
  const auto train = to_samples<float>(data.train, 8.0);
  const auto model = std::get<CsnnParams<float>>(make_model(ModelConfig{"csnn"}, train, 1));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto tr = csnn_forward(model, train[i].input);
    for (std::size_t l = 0; l < tr.z.size(); ++l) {
      double spikes = 0.0;
      for (float z : tr.z[l]) spikes += z;
      EXPECT_GT(spikes, 0.0) << "layer " << l;
    }
  }
}

}  // namespace
}  // namespace mtpc
