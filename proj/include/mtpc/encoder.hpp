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

// Multi-tone phase coding of inter-microphone time differences.
//
// The chain for one microphone pair is
//
//   analyze_tones      N-point FFT, keep bins 1..N/2 as (f, A, phi) tones
//   phase_to_spike     one spike per tone at the first peak of A sin(2 pi f t + phi)
//   coincidence_detect tone x delay-line binary matrix (Jeffress detectors)
//   group_channels     rows pooled into ERB-spaced cochlear channels
//
// and encode_multipair() runs it for every unordered pair of a clip.

#ifndef MTPC_ENCODER_HPP_
#define MTPC_ENCODER_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mtpc/array_sim.hpp"
#include "mtpc/fft.hpp"
#include "mtpc/kv_config.hpp"

namespace mtpc {

/// Tones i = 1..N/2 of an N-point transform; element j holds tone i = j + 1.
struct ToneSpectrum {
  std::size_t fft_points = 0;
  double sample_rate = 0.0;
  std::vector<double> frequency;
  std::vector<double> amplitude;
  std::vector<double> phase;  // (-pi, pi]

  std::size_t size() const { return frequency.size(); }
};

/// Taper applied to the analysed samples before the transform.
enum class AnalysisWindow { kRect, kHann };

inline AnalysisWindow parse_analysis_window(const std::string& name) {
  if (name == "rect") return AnalysisWindow::kRect;
  if (name == "hann") return AnalysisWindow::kHann;
  throw std::invalid_argument("analysis_window must be rect or hann, got '" + name + "'");
}

inline ToneSpectrum analyze_tones(std::span<const double> window, std::size_t fft_points,
                                  double sample_rate, AnalysisWindow taper = AnalysisWindow::kRect) {
  if (!is_power_of_two(fft_points) || fft_points < 2) {
    throw std::invalid_argument("fft length must be a power of two");
  }
  if (window.size() < fft_points) throw std::invalid_argument("window shorter than fft length");
  std::vector<double> frame(window.begin(), window.begin() + std::ptrdiff_t(fft_points));
  if (taper == AnalysisWindow::kHann) {
    // periodic Hann: an on-bin tone keeps its phase
    for (std::size_t n = 0; n < fft_points; ++n) {
      frame[n] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(n) / double(fft_points));
    }
  }
  const auto spectrum = fft_real<double>(std::span<const double>(frame), fft_points);
  ToneSpectrum out;
  out.fft_points = fft_points;
  out.sample_rate = sample_rate;
  const std::size_t n = fft_points / 2;
  out.frequency.resize(n);
  out.amplitude.resize(n);
  out.phase.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = j + 1;
    const double a = spectrum[i].real();
    const double b = spectrum[i].imag();
    out.frequency[j] = double(i) / double(fft_points) * sample_rate;
    out.amplitude[j] = std::hypot(a, b);
    double phi = std::atan2(b, a);
    if (phi <= -std::numbers::pi) phi = std::numbers::pi;
    out.phase[j] = phi;
  }
  return out;
}

struct PhaseSpikeTrain {
  std::vector<double> frequency;
  std::vector<std::optional<double>> time;  // seconds, absent when suppressed

  std::size_t size() const { return frequency.size(); }
};

/// First non-negative time at which sin(2 pi f t + phase) peaks.
inline double first_peak_time(double frequency, double phase) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(std::numbers::pi / 2.0 - phase, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r / (two_pi * frequency);
}

/// Tones more than `floor_db` below the strongest tone, and silent tones,
/// emit no spike.
inline PhaseSpikeTrain phase_to_spike(const ToneSpectrum& spectrum, double floor_db) {
  PhaseSpikeTrain out;
  out.frequency = spectrum.frequency;
  out.time.assign(spectrum.size(), std::nullopt);
  double peak = 0.0;
  for (double a : spectrum.amplitude) peak = std::max(peak, a);
  if (!(peak > 0.0)) return out;
  const double floor = peak * std::pow(10.0, -floor_db / 20.0);
  for (std::size_t j = 0; j < spectrum.size(); ++j) {
    const double a = spectrum.amplitude[j];
    if (a > 0.0 && a >= floor) out.time[j] = first_peak_time(spectrum.frequency[j], spectrum.phase[j]);
  }
  return out;
}

/// Delay lines tau_k = k / f_s for k = -d..d.
struct DelayLineBank {
  int half_width = 25;
  double sample_rate = 16000.0;
  double tolerance = 0.5 / 16000.0;  // seconds

  static DelayLineBank with_lines(std::size_t lines, double sample_rate) {
    if (lines == 0 || lines % 2 == 0) {
      throw std::invalid_argument("delay line count must be odd and positive");
    }
    return {static_cast<int>(lines / 2), sample_rate, 0.5 / sample_rate};
  }

  std::size_t size() const { return static_cast<std::size_t>(2 * half_width + 1); }
  /// Column of delay index k (k in -d..d).
  std::size_t column(int k) const { return static_cast<std::size_t>(k + half_width); }
  double delay(std::size_t column) const {
    return double(static_cast<int>(column) - half_width) / sample_rate;
  }
};

/// Binary tone x delay matrix, row-major.
struct CoincidencePattern {
  std::size_t n_tones = 0;
  std::size_t n_delays = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(std::size_t tone, std::size_t col) const { return bits[tone * n_delays + col]; }
  std::uint8_t& at(std::size_t tone, std::size_t col) { return bits[tone * n_delays + col]; }
};

/// Entry (i, k) fires when t_ref - t_other - tau_k is within the bank tolerance
/// of a whole number of tone periods. Short-period tones therefore fire on
/// every congruent delay line.
inline CoincidencePattern coincidence_detect(const PhaseSpikeTrain& reference,
                                             const PhaseSpikeTrain& other,
                                             const DelayLineBank& bank) {
  if (reference.frequency != other.frequency) throw std::invalid_argument("mismatched tone grids");
  CoincidencePattern out;
  out.n_tones = reference.size();
  out.n_delays = bank.size();
  out.bits.assign(out.n_tones * out.n_delays, 0);
  const double fs = bank.sample_rate;
  const double tol = bank.tolerance * fs;  // in samples
  const double lo = -bank.half_width;
  const double hi = bank.half_width;
  for (std::size_t i = 0; i < out.n_tones; ++i) {
    if (!reference.time[i] || !other.time[i]) continue;
    const double period = fs / reference.frequency[i];
    const double lag = (*reference.time[i] - *other.time[i]) * fs;
    // Lines k with -tol < lag + m * period - k <= tol, for every period m.
    const auto m_first = static_cast<long>(std::floor((lo - tol - lag) / period));
    const auto m_last = static_cast<long>(std::ceil((hi + tol - lag) / period));
    for (long m = m_first; m <= m_last; ++m) {
      const double x = lag + double(m) * period;
      const auto k_first = static_cast<long>(std::ceil(x - tol));
      const auto k_last = static_cast<long>(std::ceil(x + tol)) - 1;
      for (long k = std::max<long>(k_first, -bank.half_width); k <= std::min<long>(k_last, bank.half_width); ++k) {
        out.at(i, bank.column(static_cast<int>(k))) = 1;
      }
    }
  }
  return out;
}

inline double hz_to_erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
inline double erb_rate_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }

/// Edges of `n_channels` contiguous bands uniformly spaced on the ERB-rate
/// scale; returns n_channels + 1 increasing frequencies from f_low to f_high.
inline std::vector<double> cochlear_channels(int n_channels, double f_low, double f_high) {
  if (n_channels < 1) throw std::invalid_argument("need at least one cochlear channel");
  if (!(f_low > 0.0) || !(f_high > f_low)) throw std::invalid_argument("need 0 < f_low < f_high");
  const double e_low = hz_to_erb_rate(f_low);
  const double e_high = hz_to_erb_rate(f_high);
  std::vector<double> edges(static_cast<std::size_t>(n_channels) + 1);
  edges.front() = f_low;
  edges.back() = f_high;
  for (int c = 1; c < n_channels; ++c) {
    edges[static_cast<std::size_t>(c)] =
        erb_rate_to_hz(e_low + (e_high - e_low) * double(c) / double(n_channels));
  }
  return edges;
}

/// Band index of `f`, or nullopt outside [edges.front(), edges.back()].
/// Bands are half-open except the last, which includes its upper edge.
inline std::optional<std::size_t> channel_of(const std::vector<double>& edges, double f) {
  if (edges.size() < 2 || f < edges.front() || f > edges.back()) return std::nullopt;
  if (f == edges.back()) return edges.size() - 2;
  const auto it = std::upper_bound(edges.begin(), edges.end(), f);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

/// Spike counts per (cochlear channel, delay line), row-major.
struct ChannelPattern {
  std::size_t n_channels = 0;
  std::size_t n_delays = 0;
  std::vector<std::uint32_t> counts;
  std::vector<double> edges;

  std::uint32_t at(std::size_t ch, std::size_t col) const { return counts[ch * n_delays + col]; }
  std::uint32_t& at(std::size_t ch, std::size_t col) { return counts[ch * n_delays + col]; }

  std::uint64_t column_total(std::size_t col) const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < n_channels; ++c) s += at(c, col);
    return s;
  }

  /// Column with the largest total count; the lowest column wins ties.
  std::size_t argmax_column() const {
    std::size_t best = 0;
    std::uint64_t best_v = 0;
    for (std::size_t k = 0; k < n_delays; ++k) {
      const auto v = column_total(k);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    return best;
  }
};

inline ChannelPattern group_channels(const CoincidencePattern& pattern,
                                     const ToneSpectrum& spectrum,
                                     const std::vector<double>& edges) {
  if (pattern.n_tones != spectrum.size()) {
    throw std::invalid_argument("pattern rows do not match the tone grid");
  }
  if (edges.size() < 2) throw std::invalid_argument("need at least one channel");
  ChannelPattern out;
  out.n_channels = edges.size() - 1;
  out.n_delays = pattern.n_delays;
  out.counts.assign(out.n_channels * out.n_delays, 0);
  out.edges = edges;
  for (std::size_t i = 0; i < pattern.n_tones; ++i) {
    const auto ch = channel_of(edges, spectrum.frequency[i]);
    if (!ch) continue;
    for (std::size_t k = 0; k < pattern.n_delays; ++k) out.at(*ch, k) += pattern.at(i, k);
  }
  return out;
}

struct EncoderConfig {
  std::size_t fft_points = 1024;
  std::size_t delay_lines = 51;
  int channels = 40;
  double floor_db = 40.0;
  double f_low_hz = 50.0;
  double f_high_hz = 0.0;  // 0 selects the Nyquist frequency
  std::string analysis_window = "hann";  // rect gives the bare transform

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {"fft_points", "delay_lines", "channels",       "floor_db",
                                            "f_low_hz",   "f_high_hz",   "analysis_window"};
    return k;
  }

  static EncoderConfig from_key_values(const KeyValues& kv, bool strict = true) {
    if (strict) reject_unknown_keys(kv, keys());
    EncoderConfig c;
    read_key(kv, "fft_points", c.fft_points);
    read_key(kv, "delay_lines", c.delay_lines);
    read_key(kv, "channels", c.channels);
    read_key(kv, "floor_db", c.floor_db);
    read_key(kv, "f_low_hz", c.f_low_hz);
    read_key(kv, "f_high_hz", c.f_high_hz);
    if (auto it = kv.find("analysis_window"); it != kv.end()) c.analysis_window = it->second;
    parse_analysis_window(c.analysis_window);
    return c;
  }

  KeyValues to_key_values() const {
    return {{"fft_points", to_text(fft_points)}, {"delay_lines", to_text(delay_lines)},
            {"channels", to_text(channels)},     {"floor_db", to_text(floor_db)},
            {"f_low_hz", to_text(f_low_hz)},     {"f_high_hz", to_text(f_high_hz)},
            {"analysis_window", analysis_window}};
  }
};

/// One ChannelPattern per unordered microphone pair, in lexicographic pair
/// order: (0,1), (0,2), ..., (0,M-1), (1,2), ... For four microphones that is
/// (1,2) (1,3) (1,4) (2,3) (2,4) (3,4) in one-based numbering. The lower index
/// of every pair is the reference side.
struct MultiPairPattern {
  double sample_rate = 16000.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<ChannelPattern> patterns;
  std::optional<double> label_azimuth;

  std::size_t n_pairs() const { return patterns.size(); }
  std::size_t n_channels() const { return patterns.empty() ? 0 : patterns.front().n_channels; }
  std::size_t n_delays() const { return patterns.empty() ? 0 : patterns.front().n_delays; }
  std::uint32_t at(std::size_t pair, std::size_t ch, std::size_t col) const {
    return patterns[pair].at(ch, col);
  }
};

inline std::vector<std::pair<std::size_t, std::size_t>> mic_pairs(std::size_t n_mics) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < n_mics; ++a)
    for (std::size_t b = a + 1; b < n_mics; ++b) out.emplace_back(a, b);
  return out;
}

/// Reusable per-configuration state: channel edges and delay bank.
class MtpcEncoder {
 public:
  MtpcEncoder(EncoderConfig config, double sample_rate)
      : config_(config),
        sample_rate_(sample_rate),
        bank_(DelayLineBank::with_lines(config.delay_lines, sample_rate)),
        taper_(parse_analysis_window(config.analysis_window)) {
    if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
    const double nyquist = sample_rate / 2.0;
    const double f_high = config.f_high_hz > 0.0 ? config.f_high_hz : nyquist;
    if (f_high > nyquist) throw std::invalid_argument("f_high above Nyquist");
    edges_ = cochlear_channels(config.channels, config.f_low_hz, f_high);
    if (!is_power_of_two(config.fft_points)) {
      throw std::invalid_argument("fft length must be a power of two");
    }
  }

  const EncoderConfig& config() const { return config_; }
  const DelayLineBank& bank() const { return bank_; }
  const std::vector<double>& edges() const { return edges_; }

  MultiPairPattern encode(const MultiChannelClip& clip) const {
    if (clip.channels() < 2) throw std::invalid_argument("clip needs at least 2 channels");
    if (clip.sample_rate != sample_rate_) throw std::invalid_argument("clip sample rate mismatch");
    std::vector<ToneSpectrum> spectra;
    std::vector<PhaseSpikeTrain> trains;
    for (const auto& ch : clip.samples) {
      spectra.push_back(analyze_tones(ch, config_.fft_points, sample_rate_, taper_));
      trains.push_back(phase_to_spike(spectra.back(), config_.floor_db));
    }
    MultiPairPattern out;
    out.sample_rate = sample_rate_;
    out.label_azimuth = clip.label_azimuth;
    out.pairs = mic_pairs(clip.channels());
    for (const auto& [a, b] : out.pairs) {
      const auto coincide = coincidence_detect(trains[a], trains[b], bank_);
      out.patterns.push_back(group_channels(coincide, spectra[a], edges_));
    }
    return out;
  }

 private:
  EncoderConfig config_;
  double sample_rate_;
  DelayLineBank bank_;
  AnalysisWindow taper_;
  std::vector<double> edges_;
};

inline MultiPairPattern encode_multipair(const MultiChannelClip& clip,
                                         const EncoderConfig& config = {}) {
  return MtpcEncoder(config, clip.sample_rate).encode(clip);
}

}  // namespace mtpc

#endif  // MTPC_ENCODER_HPP_
