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

// Free-field microphone-array simulator.
//
// A point source on the horizontal plane radiates a signal that reaches each
// microphone after its exact (spherical) propagation time and with an
// inverse-distance gain. Tonal sources are evaluated in closed form; sampled
// sources are delayed with a frequency-domain phase ramp.

#ifndef MTPC_ARRAY_SIM_HPP_
#define MTPC_ARRAY_SIM_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mtpc/error.hpp"
#include "mtpc/fft.hpp"

namespace mtpc {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct MicArrayGeometry {
  std::vector<Point2> mic_positions;
  double speed_of_sound = 343.0;

  std::size_t size() const { return mic_positions.size(); }

  void validate() const {
    if (mic_positions.size() < 2) {
      throw std::invalid_argument("array needs at least 2 microphones");
    }
    if (!(speed_of_sound > 0.0)) {
      throw std::invalid_argument("speed of sound must be positive");
    }
    for (std::size_t i = 0; i < mic_positions.size(); ++i) {
      for (std::size_t j = i + 1; j < mic_positions.size(); ++j) {
        if (distance(mic_positions[i], mic_positions[j]) == 0.0) {
          throw std::invalid_argument("microphone positions must be distinct");
        }
      }
    }
  }

  /// Square array centered at the origin. Mics are numbered counterclockwise
  /// starting at 135 degrees, which places 0 degrees at the midpoint of the
  /// third and fourth microphones.
  static MicArrayGeometry square(double side = 0.064, double speed = 343.0) {
    const double h = side / 2.0;
    return {{{-h, h}, {-h, -h}, {h, -h}, {h, h}}, speed};
  }

  /// Same layout rotated counterclockwise by `degrees`.
  MicArrayGeometry rotated(double degrees) const {
    const double r = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    MicArrayGeometry out = *this;
    for (auto& p : out.mic_positions) p = {c * p.x - s * p.y, s * p.x + c * p.y};
    return out;
  }
};

struct Tone {
  double frequency_hz = 0.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

struct MultiTone {
  std::vector<Tone> tones;
};

/// Stationary Gaussian white noise over the whole clip.
struct WhiteNoiseBurst {
  double rms = 0.1;
};

struct ExternalSamples {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

using SourceSignal = std::variant<MultiTone, WhiteNoiseBurst, ExternalSamples>;

struct SourceSpec {
  double azimuth_deg = 0.0;
  double distance_m = 1.0;
  SourceSignal signal = MultiTone{};
  std::uint64_t seed = 0;

  Point2 position() const {
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    return {distance_m * std::cos(a), distance_m * std::sin(a)};
  }
};

struct MultiChannelClip {
  double sample_rate = 16000.0;
  std::vector<std::vector<double>> samples;  // channels x length
  std::optional<double> label_azimuth;

  std::size_t channels() const { return samples.size(); }
  std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }
  double duration() const { return double(length()) / sample_rate; }
};

/// Propagation time from the source to microphone `mic`.
inline double propagation_time(const MicArrayGeometry& geometry, const SourceSpec& source,
                               std::size_t mic) {
  return distance(source.position(), geometry.mic_positions.at(mic)) / geometry.speed_of_sound;
}

/// Arrival time at `pair.first` minus arrival time at `pair.second`.
inline double analytic_tdoa(const MicArrayGeometry& geometry, const SourceSpec& source,
                            std::pair<std::size_t, std::size_t> pair) {
  if (pair.first >= geometry.size() || pair.second >= geometry.size()) {
    throw std::invalid_argument("mic index out of range");
  }
  if (pair.first == pair.second) throw std::invalid_argument("degenerate pair");
  if (!(source.distance_m > 0.0)) throw std::invalid_argument("source distance must be positive");
  return propagation_time(geometry, source, pair.first) -
         propagation_time(geometry, source, pair.second);
}

/// Scales every channel by a common factor so that no sample exceeds `limit`.
inline void normalize_peak(MultiChannelClip& clip, double limit = 0.99) {
  double peak = 0.0;
  for (const auto& ch : clip.samples)
    for (double v : ch) peak = std::max(peak, std::abs(v));
  if (peak <= limit) return;
  const double g = limit / peak;
  for (auto& ch : clip.samples)
    for (double& v : ch) v *= g;
}

namespace detail {

// Delays a sampled signal by `delays[c]` samples per output channel. The
// signal is treated as periodic with the padded transform length, so the delay
// is exact for band-limited content.
inline std::vector<std::vector<double>> phase_ramp_delay(const std::vector<double>& signal,
                                                         std::size_t transform_len,
                                                         const std::vector<double>& delays,
                                                         std::size_t out_len) {
  const auto spectrum = fft_real<double>(signal, transform_len);
  const std::size_t m = transform_len;
  std::vector<std::vector<double>> out;
  out.reserve(delays.size());
  for (double d : delays) {
    std::vector<std::complex<double>> shifted(m);
    for (std::size_t k = 1; k < m / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * double(k) * d / double(m);
      shifted[k] = spectrum[k] * std::polar(1.0, angle);
      shifted[m - k] = std::conj(shifted[k]);
    }
    shifted[0] = spectrum[0];
    // The Nyquist bin has no well-defined fractional delay; drop it.
    auto time = ifft_real<double>(std::move(shifted));
    time.resize(out_len);
    out.push_back(std::move(time));
  }
  return out;
}

}  // namespace detail

inline MultiChannelClip synthesize_clip(const MicArrayGeometry& geometry,
                                        const SourceSpec& source, double duration_s,
                                        double sample_rate = 16000.0) {
  geometry.validate();
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(source.distance_m > 0.0)) throw std::invalid_argument("source distance must be positive");
  const auto length = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (!(duration_s > 0.0) || length == 0) throw std::invalid_argument("zero-length duration");

  const std::size_t n_mics = geometry.size();
  std::vector<double> arrival(n_mics), gain(n_mics);
  for (std::size_t c = 0; c < n_mics; ++c) {
    arrival[c] = propagation_time(geometry, source, c);
    gain[c] = 1.0 / distance(source.position(), geometry.mic_positions[c]);
  }

  MultiChannelClip clip;
  clip.sample_rate = sample_rate;
  clip.label_azimuth = source.azimuth_deg;
  clip.samples.assign(n_mics, std::vector<double>(length, 0.0));

  if (const auto* mt = std::get_if<MultiTone>(&source.signal)) {
    if (mt->tones.empty()) throw std::invalid_argument("multi-tone source has no tones");
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& tone : mt->tones) {
      if (!(tone.frequency_hz > 0.0) || tone.frequency_hz >= sample_rate / 2.0) {
        throw std::invalid_argument("tone frequency must lie in (0, Nyquist)");
      }
      lowest = std::min(lowest, tone.frequency_hz);
    }
    if (duration_s * lowest < 1.0 - 1e-12) {
      throw std::invalid_argument("duration shorter than one period of the lowest tone");
    }
    for (std::size_t c = 0; c < n_mics; ++c) {
      auto& ch = clip.samples[c];
      for (const auto& tone : mt->tones) {
        const double w = 2.0 * std::numbers::pi * tone.frequency_hz;
        for (std::size_t n = 0; n < length; ++n) {
          const double t = double(n) / sample_rate - arrival[c];
          ch[n] += gain[c] * tone.amplitude * std::sin(w * t + tone.phase);
        }
      }
    }
  } else {
    std::vector<double> signal;
    std::size_t transform_len = 0;
    if (const auto* wn = std::get_if<WhiteNoiseBurst>(&source.signal)) {
      transform_len = next_power_of_two(length);
      std::mt19937_64 rng(source.seed);
      std::normal_distribution<double> normal(0.0, wn->rms);
      signal.resize(transform_len);
      for (double& v : signal) v = normal(rng);
    } else {
      const auto& ext = std::get<ExternalSamples>(source.signal);
      if (ext.sample_rate != sample_rate) {
        throw std::invalid_argument("external samples must match the target sample rate");
      }
      const double max_delay = *std::max_element(arrival.begin(), arrival.end()) * sample_rate;
      // Zero padding absorbs the circular wrap of the largest delay.
      transform_len = next_power_of_two(std::max(length, ext.samples.size()) +
                                        static_cast<std::size_t>(std::ceil(max_delay)) + 64);
      signal.assign(ext.samples.begin(), ext.samples.end());
    }
    std::vector<double> delays(n_mics);
    for (std::size_t c = 0; c < n_mics; ++c) delays[c] = arrival[c] * sample_rate;
    auto delayed = detail::phase_ramp_delay(signal, transform_len, delays, length);
    for (std::size_t c = 0; c < n_mics; ++c) {
      for (std::size_t n = 0; n < length; ++n) clip.samples[c][n] = gain[c] * delayed[c][n];
    }
  }
  normalize_peak(clip);
  return clip;
}

struct WhiteNoise {};

/// Interfering point source rendered through the same simulator.
struct DirectionalNoise {
  MicArrayGeometry geometry;
  SourceSpec source;
};

using NoiseKind = std::variant<WhiteNoise, DirectionalNoise>;

inline double mean_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / double(x.size());
}

/// Adds noise at the requested SNR. White noise is independent per channel
/// and scaled per channel; directional noise keeps its own inter-channel
/// structure and is scaled by one gain against the total signal power.
/// An infinite SNR returns the clip unchanged.
inline MultiChannelClip add_noise(const MultiChannelClip& clip, double snr_db,
                                  const NoiseKind& kind, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return clip;
  if (std::isnan(snr_db)) throw std::invalid_argument("snr is NaN");
  double total_signal = 0.0;
  for (const auto& ch : clip.samples) total_signal += mean_power(ch);
  if (!(total_signal > 0.0)) throw DataError("undefined SNR");

  const double ratio = std::pow(10.0, snr_db / 10.0);
  MultiChannelClip out = clip;
  if (std::holds_alternative<WhiteNoise>(kind)) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& ch : out.samples) {
      std::vector<double> noise(ch.size());
      for (double& v : noise) v = normal(rng);
      const double ps = mean_power(ch);
      const double pn = mean_power(noise);
      const double g = (ps > 0.0 && pn > 0.0) ? std::sqrt(ps / ratio / pn) : 0.0;
      for (std::size_t n = 0; n < ch.size(); ++n) ch[n] += g * noise[n];
    }
  } else {
    const auto& dn = std::get<DirectionalNoise>(kind);
    SourceSpec src = dn.source;
    src.seed = seed;
    const MultiChannelClip noise =
        synthesize_clip(dn.geometry, src, clip.duration(), clip.sample_rate);
    if (noise.channels() != clip.channels()) {
      throw std::invalid_argument("noise geometry channel count differs from clip");
    }
    double total_noise = 0.0;
    for (const auto& ch : noise.samples) total_noise += mean_power(ch);
    if (!(total_noise > 0.0)) throw DataError("directional noise is silent");
    const double g = std::sqrt(total_signal / ratio / total_noise);
    for (std::size_t c = 0; c < out.channels(); ++c) {
      const std::size_t len = std::min(out.samples[c].size(), noise.samples[c].size());
      for (std::size_t n = 0; n < len; ++n) out.samples[c][n] += g * noise.samples[c][n];
    }
  }
  normalize_peak(out);
  return out;
}

/// Number of whole windows of `window` samples taken every `stride` samples.
constexpr std::size_t window_count(std::size_t length, std::size_t window, std::size_t stride) {
  return length < window ? 0 : (length - window) / stride + 1;
}

inline std::vector<MultiChannelClip> clip_windows(const MultiChannelClip& clip,
                                                  double window_s = 0.170,
                                                  double stride_s = 0.085) {
  const auto window = static_cast<std::size_t>(std::llround(window_s * clip.sample_rate));
  const auto stride = static_cast<std::size_t>(std::llround(stride_s * clip.sample_rate));
  if (window == 0 || stride == 0) throw std::invalid_argument("window and stride must be positive");
  const std::size_t count = window_count(clip.length(), window, stride);
  std::vector<MultiChannelClip> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    MultiChannelClip piece;
    piece.sample_rate = clip.sample_rate;
    piece.label_azimuth = clip.label_azimuth;
    for (const auto& ch : clip.samples) {
      const auto first = ch.begin() + static_cast<std::ptrdiff_t>(w * stride);
      piece.samples.emplace_back(first, first + static_cast<std::ptrdiff_t>(window));
    }
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace mtpc

#endif  // MTPC_ARRAY_SIM_HPP_
