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

// `.mtpc` pattern files, all fields little-endian:
//
//   "MTPC" u16 version=1 u16 n_pairs u16 n_channels u16 n_delays f64 f_s
//   u16 counts[n_pairs][n_channels][n_delays]
//   [f32 azimuth label]            optional, present iff bytes remain
//
// Channel edges and pair indices are not stored; readers reconstruct the
// lexicographic pair order from n_pairs when it corresponds to a full array.

#ifndef MTPC_PATTERN_IO_HPP_
#define MTPC_PATTERN_IO_HPP_

#include <fstream>
#include <limits>
#include <string>

#include "mtpc/binary_io.hpp"
#include "mtpc/encoder.hpp"

namespace mtpc {

inline void write_pattern(std::ostream& out, const MultiPairPattern& p) {
  out.write("MTPC", 4);
  io::put_le<std::uint16_t>(out, 1);
  io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.n_pairs()));
  io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.n_channels()));
  io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.n_delays()));
  io::put_f64(out, p.sample_rate);
  for (const auto& cp : p.patterns) {
    if (cp.n_channels != p.n_channels() || cp.n_delays != p.n_delays()) {
      throw std::invalid_argument("pair patterns must share dimensions");
    }
    for (auto c : cp.counts) {
      if (c > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("count overflows u16");
      io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(c));
    }
  }
  if (p.label_azimuth) io::put_f32(out, static_cast<float>(*p.label_azimuth));
}

inline MultiPairPattern read_pattern(std::istream& in) {
  io::expect_magic(in, "MTPC");
  const auto version = io::get_le<std::uint16_t>(in);
  if (version != 1) throw DataError("unsupported pattern version " + std::to_string(version));
  const auto n_pairs = io::get_le<std::uint16_t>(in);
  const auto n_channels = io::get_le<std::uint16_t>(in);
  const auto n_delays = io::get_le<std::uint16_t>(in);
  MultiPairPattern p;
  p.sample_rate = io::get_f64(in);
  for (std::size_t m = 2; m < 64; ++m) {
    if (m * (m - 1) / 2 == n_pairs) {
      p.pairs = mic_pairs(m);
      break;
    }
  }
  for (std::size_t q = 0; q < n_pairs; ++q) {
    ChannelPattern cp;
    cp.n_channels = n_channels;
    cp.n_delays = n_delays;
    cp.counts.resize(std::size_t(n_channels) * n_delays);
    for (auto& c : cp.counts) c = io::get_le<std::uint16_t>(in);
    p.patterns.push_back(std::move(cp));
  }
  if (in.peek() != std::char_traits<char>::eof()) p.label_azimuth = io::get_f32(in);
  return p;
}

inline void save_pattern(const std::string& path, const MultiPairPattern& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_pattern(out, p);
}

inline MultiPairPattern load_pattern(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_pattern(in);
}

}  // namespace mtpc

#endif  // MTPC_PATTERN_IO_HPP_
