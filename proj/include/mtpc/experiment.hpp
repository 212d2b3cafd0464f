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

// Experiment harness: synthetic datasets, training loops, evaluation reports,
// delay-line / channel sweeps and noise studies.

#ifndef MTPC_EXPERIMENT_HPP_
#define MTPC_EXPERIMENT_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mtpc/array_sim.hpp"
#include "mtpc/azimuth.hpp"
#include "mtpc/checkpoint.hpp"
#include "mtpc/csnn.hpp"
#include "mtpc/encoder.hpp"
#include "mtpc/kv_config.hpp"
#include "mtpc/network.hpp"
#include "mtpc/rsnn.hpp"
#include "mtpc/trainer.hpp"

namespace mtpc {

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0, std::uint64_t d = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base ^ mix_seed(a)) ^ b) ^ c) ^ d);
}

enum class SourceKind { kMultiTone, kNoiseBurst };

inline const char* to_string(SourceKind k) {
  return k == SourceKind::kMultiTone ? "multi_tone" : "noise_burst";
}

/// Random tone mixture: `count` tones, log-uniform in [f_min, f_max].
inline MultiTone random_multitone(std::uint64_t seed, int count = 16, double f_min = 100.0,
                                  double f_max = 4000.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logf(std::log(f_min), std::log(f_max));
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  MultiTone mt;
  for (int i = 0; i < count; ++i) {
    mt.tones.push_back({std::exp(logf(rng)), amp(rng) / double(count), ph(rng)});
  }
  return mt;
}

/// Fixed four-tone source (200, 400, 600, 800 Hz, equal amplitude).
inline MultiTone four_tone_source(double amplitude = 0.2) {
  return {{{200.0, amplitude, 0.0}, {400.0, amplitude, 0.0}, {600.0, amplitude, 0.0},
           {800.0, amplitude, 0.0}}};
}

struct DatasetConfig {
  double array_side_m = 0.064;
  double speed_of_sound = 343.0;
  double sample_rate = 16000.0;
  double azimuth_start = 0.0;
  double azimuth_step = 5.0;
  int azimuth_count = 72;
  std::vector<double> distances = {1.0, 1.5};
  bool multi_tone = true;
  bool noise_burst = true;
  int windows_per_azimuth = 200;
  double train_fraction = 0.8;
  double window_s = 0.170;
  double stride_s = 0.085;
  // Background noise. +inf disables it.
  double snr_db = 20.0;
  // Directional interferer from one of four directions, SNR drawn per clip
  // uniformly in [snr_min, snr_max]. Disabled when directional is false.
  bool directional = false;
  double directional_snr_min = 0.0;
  double directional_snr_max = 5.0;
  double directional_distance = 1.5;
  std::uint64_t seed = 1;

  MicArrayGeometry geometry() const { return MicArrayGeometry::square(array_side_m, speed_of_sound); }

  std::vector<double> azimuths() const {
    std::vector<double> out;
    for (int i = 0; i < azimuth_count; ++i) {
      out.push_back(std::fmod(azimuth_start + azimuth_step * i, 360.0));
    }
    return out;
  }

  std::vector<SourceKind> kinds() const {
    std::vector<SourceKind> k;
    if (multi_tone) k.push_back(SourceKind::kMultiTone);
    if (noise_burst) k.push_back(SourceKind::kNoiseBurst);
    return k;
  }
};

/// One recording session: a single source position and signal, rendered as
/// one continuous clip and cut into windows.
struct ClipPlan {
  double azimuth = 0.0;
  double distance = 1.0;
  SourceKind kind = SourceKind::kMultiTone;
  bool train = true;
  int windows = 1;
  double duration_s = 0.0;  // 0 renders just enough samples for `windows`
  double snr_db = std::numeric_limits<double>::infinity();
  std::optional<double> interferer_azimuth;
  double interferer_snr_db = 0.0;
  std::uint64_t seed = 0;
};

/// Splits each (azimuth, distance, kind) cell into one training and one
/// test clip so that no test window overlaps a training window.
inline std::vector<ClipPlan> plan_clips(const DatasetConfig& cfg) {
  const auto kinds = cfg.kinds();
  if (kinds.empty() || cfg.distances.empty()) throw std::invalid_argument("empty dataset grid");
  const int cells = int(kinds.size() * cfg.distances.size());
  const int per_cell = std::max(1, cfg.windows_per_azimuth / cells);
  const int train_w = std::clamp(int(std::lround(per_cell * cfg.train_fraction)), 0, per_cell);
  std::vector<ClipPlan> plans;
  const auto az = cfg.azimuths();
  for (std::size_t a = 0; a < az.size(); ++a) {
    for (std::size_t d = 0; d < cfg.distances.size(); ++d) {
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        for (int split = 0; split < 2; ++split) {
          ClipPlan p;
          p.azimuth = az[a];
          p.distance = cfg.distances[d];
          p.kind = kinds[k];
          p.train = split == 0;
          p.windows = split == 0 ? train_w : per_cell - train_w;
          if (p.windows <= 0) continue;
          p.snr_db = cfg.snr_db;
          p.seed = derive_seed(cfg.seed, a, d, k, std::uint64_t(split));
          if (cfg.directional) {
            std::mt19937_64 rng(derive_seed(p.seed, 77));
            p.interferer_azimuth = 90.0 * double(rng() % 4);
            std::uniform_real_distribution<double> snr(cfg.directional_snr_min,
                                                       cfg.directional_snr_max);
            p.interferer_snr_db = snr(rng);
          }
          plans.push_back(p);
        }
      }
    }
  }
  return plans;
}

inline SourceSpec source_for(const ClipPlan& p) {
  SourceSpec s;
  s.azimuth_deg = p.azimuth;
  s.distance_m = p.distance;
  s.seed = derive_seed(p.seed, 1);
  if (p.kind == SourceKind::kMultiTone) {
    s.signal = random_multitone(derive_seed(p.seed, 2));
  } else {
    s.signal = WhiteNoiseBurst{0.1};
  }
  return s;
}

/// Renders a planned clip with all its noise, at full clip length.
inline MultiChannelClip render_clip(const DatasetConfig& cfg, const ClipPlan& p) {
  const auto geometry = cfg.geometry();
  const double duration =
      p.duration_s > 0.0 ? p.duration_s : cfg.window_s + cfg.stride_s * double(p.windows - 1) + 1e-9;
  auto clip = synthesize_clip(geometry, source_for(p), duration, cfg.sample_rate);
  if (p.interferer_azimuth) {
    SourceSpec noise;
    noise.azimuth_deg = *p.interferer_azimuth;
    noise.distance_m = cfg.directional_distance;
    noise.signal = random_multitone(derive_seed(p.seed, 3), 24, 100.0, 4000.0);
    clip = add_noise(clip, p.interferer_snr_db, DirectionalNoise{geometry, noise},
                     derive_seed(p.seed, 4));
  }
  clip = add_noise(clip, p.snr_db, WhiteNoise{}, derive_seed(p.seed, 5));
  clip.label_azimuth = p.azimuth;
  return clip;
}

struct EncodedWindow {
  MultiPairPattern pattern;
  double azimuth = 0.0;
  double distance = 1.0;
};

struct EncodedDataset {
  std::vector<EncodedWindow> train;
  std::vector<EncodedWindow> test;
};

inline EncodedDataset build_dataset(const DatasetConfig& cfg, const EncoderConfig& enc_cfg) {
  const MtpcEncoder encoder(enc_cfg, cfg.sample_rate);
  EncodedDataset out;
  for (const auto& plan : plan_clips(cfg)) {
    const auto clip = render_clip(cfg, plan);
    for (const auto& w : clip_windows(clip, cfg.window_s, cfg.stride_s)) {
      EncodedWindow ew{encoder.encode(w), plan.azimuth, plan.distance};
      (plan.train ? out.train : out.test).push_back(std::move(ew));
    }
  }
  return out;
}

template <std::floating_point T>
std::vector<TrainingSample<T>> to_samples(const std::vector<EncodedWindow>& windows, double sigma) {
  std::vector<TrainingSample<T>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    out.push_back({PatternTensor<T>::from_pattern(w.pattern), gaussian_label<T>(w.azimuth, sigma),
                   w.azimuth});
  }
  return out;
}

/// Per-azimuth and overall circular MAE.
struct EvalReport {
  double bin_width_deg = 5.0;
  std::vector<std::size_t> counts;
  std::vector<double> error_sums;
  std::vector<double> estimates;
  std::vector<double> labels;
  std::size_t silent = 0;  // samples with no output activity, scored 180

  explicit EvalReport(double bin_width = 5.0)
      : bin_width_deg(bin_width),
        counts(static_cast<std::size_t>(std::lround(360.0 / bin_width)), 0),
        error_sums(counts.size(), 0.0) {}

  void add(std::optional<double> estimate, double label) {
    const double err = estimate ? circular_distance(*estimate, label) : 180.0;
    if (!estimate) ++silent;
    const auto bin = static_cast<std::size_t>(std::lround(label / bin_width_deg)) % counts.size();
    ++counts[bin];
    error_sums[bin] += err;
    // Silent outputs count as the point diametrically opposite the label.
    estimates.push_back(estimate ? *estimate : std::fmod(label + 180.0, 360.0));
    labels.push_back(label);
  }

  std::size_t size() const { return labels.size(); }

  double overall_mae() const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < counts.size(); ++b) {
      s += error_sums[b];
      n += counts[b];
    }
    return n ? s / double(n) : 0.0;
  }

  double bin_mae(std::size_t b) const { return counts[b] ? error_sums[b] / double(counts[b]) : 0.0; }

  /// CSV with one row per populated azimuth bin.
  std::string to_csv() const {
    std::string out = "azimuth_deg,n,mae_deg\n";
    for (std::size_t b = 0; b < counts.size(); ++b) {
      if (!counts[b]) continue;
      out += to_text(double(b) * bin_width_deg) + "," + std::to_string(counts[b]) + "," +
             to_text(bin_mae(b)) + "\n";
    }
    return out;
  }
};

template <class Model, std::floating_point T = typename Model::Scalar>
EvalReport evaluate(const Model& model, const std::vector<TrainingSample<T>>& samples,
                    double bin_width = 5.0) {
  EvalReport report(bin_width);
  for (const auto& s : samples) {
    const auto rates = predict(model, s.input);
    std::optional<double> est;
    try {
      est = double(decode_peak<T>(rates));
    } catch (const DataError&) {
    }
    report.add(est, s.azimuth);
  }
  return report;
}

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double label_sigma = 8.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Stop once the held-out MAE reaches this value (0 disables).
  double target_mae = 0.0;
  bool verbose = false;
};

struct EpochLog {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double mae_deg = 0.0;
  double seconds = 0.0;
};

template <class Model>
struct TrainResult {
  Model best;
  double best_mae = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Mean loss over `samples` without updating anything.
template <class Model, std::floating_point T = typename Model::Scalar>
double mean_loss(const Model& model, const std::vector<TrainingSample<T>>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) {
    const auto o = normalized_output(model, s.input);
    acc += double(mse_loss<T>(o, s.label));
  }
  return samples.empty() ? 0.0 : acc / double(samples.size());
}

/// Shuffled mini-batch training; keeps the model with the lowest validation
/// MAE. `on_epoch` (optional) sees every log row as it is produced.
template <class Model, std::floating_point T = typename Model::Scalar>
TrainResult<Model> train_model(Model model, const std::vector<TrainingSample<T>>& train,
                               const std::vector<TrainingSample<T>>& validation,
                               const TrainConfig& cfg,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  TrainResult<Model> result{model};
  AdamState<T> opt;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x7121));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingSample<T>> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(train[order[i]]);
      }
      loss_sum += double(bptt_update(model, std::span<const TrainingSample<T>>(batch), opt,
                                     T(cfg.learning_rate), cfg.threads));
      ++batches;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochLog tr{epoch, "train", loss_sum / double(batches), std::numeric_limits<double>::quiet_NaN(), secs};
    result.log.push_back(tr);
    if (on_epoch) on_epoch(tr);
    const auto& eval_set = validation.empty() ? train : validation;
    const auto report = evaluate(model, eval_set);
    EpochLog va{epoch, "validation", mean_loss(model, eval_set), report.overall_mae(), secs};
    result.log.push_back(va);
    if (on_epoch) on_epoch(va);
    if (va.mae_deg < result.best_mae) {
      result.best_mae = va.mae_deg;
      result.best_epoch = epoch;
      result.best = model;
    }
    if (cfg.target_mae > 0.0 && result.best_mae <= cfg.target_mae) break;
  }
  return result;
}

/// Back-end selection and neuron constants.
struct ModelConfig {
  std::string backend = "rsnn";  // rsnn | csnn
  std::size_t hidden = 128;
  float tau_m = 20.0f;
  float tau_out = 20.0f;
  float threshold = 1.0f;
  int refractory_steps = 1;
  std::string readout = "spiking";  // spiking | leaky
  // Mean nonzero input current at initialization, as a multiple of the
  // threshold; ignored when input_scale is set.
  float input_target = 0.5f;
  float input_scale = 0.0f;
  std::size_t csnn_steps = 10;
  // With ten steps and variance-1/fan-in weights a slow, high-threshold
  // membrane never fires past the first convolution.
  float csnn_tau_m = 2.0f;
  float csnn_threshold = 0.1f;

  Readout readout_kind() const {
    if (readout == "spiking") return Readout::kSpiking;
    if (readout == "leaky") return Readout::kLeakyIntegrator;
    throw std::invalid_argument("readout must be spiking or leaky");
  }
};

/// Fresh model sized for `train`, with input scaling fitted to it.
inline AnyModel make_model(const ModelConfig& cfg, const std::vector<TrainingSample<float>>& train,
                           std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("cannot size a model without training data");
  const auto& x = train.front().input;
  LifParams<float> lif;
  lif.tau_m = cfg.tau_m;
  lif.threshold = cfg.threshold;
  lif.refractory_steps = cfg.refractory_steps;
  lif.validate();
  std::vector<PatternTensor<float>> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(s.input);
  if (cfg.backend == "rsnn") {
    auto m = RsnnParams<float>::init(x.n_channels, cfg.hidden, kAzimuthBins, seed, lif);
    m.output_lif.tau_m = cfg.tau_out;
    m.readout = cfg.readout_kind();
    m.input_scale = cfg.input_scale > 0.0f
                        ? cfg.input_scale
                        : calibrate_input_scale(inputs, cfg.input_target * cfg.threshold);
    return m;
  }
  if (cfg.backend == "csnn") {
    lif.tau_m = cfg.csnn_tau_m;
    lif.threshold = cfg.csnn_threshold;
    lif.validate();
    auto m = CsnnParams<float>::init(x.n_pairs, x.n_delays, x.n_channels, seed, lif);
    m.steps = cfg.csnn_steps;
    m.readout = cfg.readout_kind();
    m.input_norm = percentile95_count<float>(inputs);
    return m;
  }
  throw std::invalid_argument("backend must be rsnn or csnn");
}

inline Checkpoint to_checkpoint(const AnyModel& m) {
  return std::visit([](const auto& v) { return to_checkpoint(v); }, m);
}

inline TrainResult<AnyModel> train_any(const AnyModel& model,
                                       const std::vector<TrainingSample<float>>& train,
                                       const std::vector<TrainingSample<float>>& validation,
                                       const TrainConfig& cfg,
                                       const std::function<void(const EpochLog&)>& on_epoch = {}) {
  return std::visit(
      [&](const auto& m) {
        auto r = train_model(m, train, validation, cfg, on_epoch);
        return TrainResult<AnyModel>{AnyModel(std::move(r.best)), r.best_mae, r.best_epoch, std::move(r.log)};
      },
      model);
}

inline EvalReport evaluate_any(const AnyModel& model, const std::vector<TrainingSample<float>>& samples,
                               double bin_width = 5.0) {
  return std::visit([&](const auto& m) { return evaluate(m, samples, bin_width); }, model);
}

/// Splits off every k-th sample of a seeded shuffle as validation data.
template <class S>
std::pair<std::vector<S>, std::vector<S>> split_validation(const std::vector<S>& all, double fraction,
                                                           std::uint64_t seed) {
  if (fraction <= 0.0) return {all, {}};
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x5A11));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * double(all.size())));
  std::vector<char> is_val(all.size(), 0);
  for (std::size_t i = 0; i < n_val && i < order.size(); ++i) is_val[order[i]] = 1;
  std::pair<std::vector<S>, std::vector<S>> out;
  for (std::size_t i = 0; i < all.size(); ++i) (is_val[i] ? out.second : out.first).push_back(all[i]);
  return out;
}

}  // namespace mtpc

#endif  // MTPC_EXPERIMENT_HPP_
