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

// RIFF/WAVE, 16-bit signed PCM, interleaved channels.

#ifndef MTPC_WAV_HPP_
#define MTPC_WAV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtpc/array_sim.hpp"
#include "mtpc/binary_io.hpp"

namespace mtpc {

inline std::int16_t to_pcm16(double v) {
  const double s = std::round(std::clamp(v, -1.0, 1.0) * 32767.0);
  return static_cast<std::int16_t>(s);
}

inline void write_wav(std::ostream& out, const MultiChannelClip& clip) {
  const auto channels = static_cast<std::uint16_t>(clip.channels());
  if (channels == 0) throw std::invalid_argument("clip has no channels");
  const auto rate = static_cast<std::uint32_t>(std::llround(clip.sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.length() * channels * 2);
  out.write("RIFF", 4);
  io::put_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  io::put_le<std::uint32_t>(out, 16);
  io::put_le<std::uint16_t>(out, 1);  // PCM
  io::put_le<std::uint16_t>(out, channels);
  io::put_le<std::uint32_t>(out, rate);
  io::put_le<std::uint32_t>(out, rate * channels * 2);
  io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 2));
  io::put_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  io::put_le<std::uint32_t>(out, data_bytes);
  for (std::size_t n = 0; n < clip.length(); ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(to_pcm16(clip.samples[c][n])));
    }
  }
}

inline MultiChannelClip read_wav(std::istream& in) {
  char tag[4];
  auto read_tag = [&](const char* what) {
    if (!in.read(tag, 4)) throw DataError(std::string("truncated WAV: missing ") + what);
  };
  read_tag("RIFF");
  if (std::string(tag, 4) != "RIFF") throw DataError("not a RIFF file");
  io::get_le<std::uint32_t>(in);
  read_tag("WAVE");
  if (std::string(tag, 4) != "WAVE") throw DataError("not a WAVE file");

  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    if (!in.read(tag, 4)) throw DataError("WAV has no data chunk");
    const auto size = io::get_le<std::uint32_t>(in);
    const std::string id(tag, 4);
    if (id == "fmt ") {
      if (size < 16) throw DataError("fmt chunk too small");
      const auto format = io::get_le<std::uint16_t>(in);
      channels = io::get_le<std::uint16_t>(in);
      rate = io::get_le<std::uint32_t>(in);
      io::get_le<std::uint32_t>(in);
      io::get_le<std::uint16_t>(in);
      bits = io::get_le<std::uint16_t>(in);
      in.ignore(size - 16 + (size & 1));
      if (format != 1 && format != 0xFFFE) throw DataError("only PCM WAV is supported");
      if (bits != 16) throw DataError("only 16-bit WAV is supported");
      if (channels == 0 || rate == 0) throw DataError("invalid WAV format fields");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("data chunk before fmt chunk");
      const std::size_t frames = size / (2u * channels);
      MultiChannelClip clip;
      clip.sample_rate = rate;
      clip.samples.assign(channels, std::vector<double>(frames));
      for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(io::get_le<std::uint16_t>(in));
          clip.samples[c][n] = double(raw) / 32767.0;
        }
      }
      return clip;
    } else {
      in.ignore(size + (size & 1));
    }
  }
}

inline void save_wav(const std::string& path, const MultiChannelClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_wav(out, clip);
}

inline MultiChannelClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_wav(in);
}

}  // namespace mtpc

#endif  // MTPC_WAV_HPP_
