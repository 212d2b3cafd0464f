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

// Model checkpoints.
//
// Layout, little-endian:
//
//   "MTPW"  u16 version  u16 tag_len  tag bytes  u32 tensor_count
//   per tensor: u16 name_len  name bytes  u32 rank  u32 dims[rank]  f32 data
//   u32 CRC-32 of every preceding byte
//
// Hyperparameters travel as small tensors under "meta." names.

#ifndef MTPC_CHECKPOINT_HPP_
#define MTPC_CHECKPOINT_HPP_

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mtpc/binary_io.hpp"
#include "mtpc/csnn.hpp"
#include "mtpc/error.hpp"
#include "mtpc/rsnn.hpp"

namespace mtpc {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  std::string arch;
  std::vector<NamedTensor> tensors;

  const NamedTensor& get(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw DataError("checkpoint is missing tensor " + name);
  }

  void add(std::string name, std::vector<std::uint32_t> dims, std::vector<float> data) {
    tensors.push_back({std::move(name), std::move(dims), std::move(data)});
  }
};

inline std::uint32_t crc32_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  out.write("MTPW", 4);
  io::put_le<std::uint16_t>(out, kCheckpointVersion);
  io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(ck.arch.size()));
  out.write(ck.arch.data(), std::streamsize(ck.arch.size()));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    std::size_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.data.size()) throw std::invalid_argument("tensor " + t.name + " has inconsistent dims");
    io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), std::streamsize(t.name.size()));
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) io::put_le<std::uint32_t>(out, d);
    for (float v : t.data) io::put_f32(out, v);
  }
  std::string bytes = out.str();
  std::ostringstream tail(std::ios::binary);
  io::put_le<std::uint32_t>(tail, crc32_of(bytes));
  return bytes + tail.str();
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 + 2 + 2 + 4 + 4) throw DataError("checkpoint truncated");
  const std::string body = bytes.substr(0, bytes.size() - 4);
  std::istringstream crc_in(bytes.substr(bytes.size() - 4), std::ios::binary);
  if (io::get_le<std::uint32_t>(crc_in) != crc32_of(body)) throw DataError("checkpoint CRC mismatch");

  std::istringstream in(body, std::ios::binary);
  io::expect_magic(in, "MTPW");
  const auto version = io::get_le<std::uint16_t>(in);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.arch.resize(io::get_le<std::uint16_t>(in));
  if (!in.read(ck.arch.data(), std::streamsize(ck.arch.size()))) throw DataError("unexpected end of file");
  const auto count = io::get_le<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name.resize(io::get_le<std::uint16_t>(in));
    if (!in.read(t.name.data(), std::streamsize(t.name.size()))) throw DataError("unexpected end of file");
    const auto rank = io::get_le<std::uint32_t>(in);
    if (rank > 8) throw DataError("implausible tensor rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(io::get_le<std::uint32_t>(in));
      n *= t.dims.back();
    }
    if (n * 4 > body.size()) throw DataError("tensor larger than file");
    t.data.resize(n);
    for (auto& v : t.data) v = io::get_f32(in);
    ck.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const auto bytes = encode_checkpoint(ck);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

namespace detail {

inline std::vector<float> lif_to_floats(const LifParams<float>& p) {
  return {p.tau_m, p.threshold, p.dt, float(p.refractory_steps)};
}

inline LifParams<float> lif_from_floats(const std::vector<float>& v) {
  if (v.size() != 4) throw DataError("bad LIF record in checkpoint");
  LifParams<float> p;
  p.tau_m = v[0];
  p.threshold = v[1];
  p.dt = v[2];
  p.refractory_steps = static_cast<int>(v[3]);
  p.validate();
  return p;
}

template <class Model>
void put_trainable(Checkpoint& ck, Model& m) {
  for (const auto& t : m.trainable()) ck.add(t.name, t.dims, {t.data.begin(), t.data.end()});
}

template <class Model>
void get_trainable(const Checkpoint& ck, Model& m) {
  for (auto& t : m.trainable()) {
    const auto& src = ck.get(t.name);
    if (src.dims != t.dims) throw DataError("tensor " + t.name + " has unexpected shape");
    std::copy(src.data.begin(), src.data.end(), t.data.begin());
  }
}

inline std::uint32_t u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace detail

inline Checkpoint to_checkpoint(RsnnParams<float> m) {
  Checkpoint ck{"rsnn", {}};
  ck.add("meta.shape", {3}, {float(m.n_in), float(m.n_hidden), float(m.n_out)});
  ck.add("meta.hidden_lif", {4}, detail::lif_to_floats(m.hidden_lif));
  ck.add("meta.output_lif", {4}, detail::lif_to_floats(m.output_lif));
  ck.add("meta.input_scale", {1}, {m.input_scale});
  ck.add("meta.readout", {1}, {float(static_cast<int>(m.readout))});
  detail::put_trainable(ck, m);
  return ck;
}

inline Checkpoint to_checkpoint(CsnnParams<float> m) {
  Checkpoint ck{"csnn", {}};
  ck.add("meta.shape", {5},
         {float(m.n_pairs), float(m.n_delays), float(m.n_channels), float(m.n_fc), float(m.n_out)});
  std::vector<float> cc(m.conv_channels.begin(), m.conv_channels.end());
  ck.add("meta.conv_channels", {detail::u32(cc.size())}, cc);
  ck.add("meta.lif", {4}, detail::lif_to_floats(m.lif));
  ck.add("meta.steps", {1}, {float(m.steps)});
  ck.add("meta.input_norm", {1}, {m.input_norm});
  ck.add("meta.readout", {1}, {float(static_cast<int>(m.readout))});
  detail::put_trainable(ck, m);
  return ck;
}

inline Readout readout_from(const Checkpoint& ck) {
  const int r = static_cast<int>(ck.get("meta.readout").data.at(0));
  if (r != 0 && r != 1) throw DataError("unknown readout kind");
  return static_cast<Readout>(r);
}

inline RsnnParams<float> rsnn_from_checkpoint(const Checkpoint& ck) {
  if (ck.arch != "rsnn") throw DataError("checkpoint holds a " + ck.arch + " model, not rsnn");
  const auto& shape = ck.get("meta.shape").data;
  if (shape.size() != 3) throw DataError("bad rsnn shape record");
  auto m = RsnnParams<float>::init(std::size_t(shape[0]), std::size_t(shape[1]), std::size_t(shape[2]), 0);
  m.hidden_lif = detail::lif_from_floats(ck.get("meta.hidden_lif").data);
  m.output_lif = detail::lif_from_floats(ck.get("meta.output_lif").data);
  m.input_scale = ck.get("meta.input_scale").data.at(0);
  m.readout = readout_from(ck);
  detail::get_trainable(ck, m);
  m.validate();
  return m;
}

inline CsnnParams<float> csnn_from_checkpoint(const Checkpoint& ck) {
  if (ck.arch != "csnn") throw DataError("checkpoint holds a " + ck.arch + " model, not csnn");
  const auto& shape = ck.get("meta.shape").data;
  if (shape.size() != 5) throw DataError("bad csnn shape record");
  std::vector<std::size_t> cc;
  for (float v : ck.get("meta.conv_channels").data) cc.push_back(std::size_t(v));
  auto m = CsnnParams<float>::init(std::size_t(shape[0]), std::size_t(shape[1]), std::size_t(shape[2]), 0,
                                   detail::lif_from_floats(ck.get("meta.lif").data), cc,
                                   std::size_t(shape[3]), std::size_t(shape[4]));
  m.steps = std::size_t(ck.get("meta.steps").data.at(0));
  m.input_norm = ck.get("meta.input_norm").data.at(0);
  m.readout = readout_from(ck);
  detail::get_trainable(ck, m);
  m.validate();
  return m;
}

using AnyModel = std::variant<RsnnParams<float>, CsnnParams<float>>;

inline AnyModel model_from_checkpoint(const Checkpoint& ck) {
  if (ck.arch == "rsnn") return rsnn_from_checkpoint(ck);
  if (ck.arch == "csnn") return csnn_from_checkpoint(ck);
  throw DataError("unknown architecture tag '" + ck.arch + "'");
}

}  // namespace mtpc

#endif  // MTPC_CHECKPOINT_HPP_
