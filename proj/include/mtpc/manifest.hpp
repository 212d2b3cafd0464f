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

// Dataset manifest CSV: path,azimuth_deg,distance_m,snr_db,noise_kind,split

#ifndef MTPC_MANIFEST_HPP_
#define MTPC_MANIFEST_HPP_

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtpc/error.hpp"
#include "mtpc/kv_config.hpp"

namespace mtpc {

inline constexpr const char* kManifestHeader = "path,azimuth_deg,distance_m,snr_db,noise_kind,split";

struct ManifestRow {
  std::string path;
  double azimuth_deg = 0.0;
  double distance_m = 1.0;
  double snr_db = 0.0;  // +inf for noiseless
  std::string noise_kind = "none";
  std::string split = "train";
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_manifest(std::ostream& out, const std::vector<ManifestRow>& rows) {
  out << kManifestHeader << "\n";
  for (const auto& r : rows) {
    if (r.path.find(',') != std::string::npos) throw std::invalid_argument("manifest paths may not contain commas");
    out << r.path << "," << to_text(r.azimuth_deg) << "," << to_text(r.distance_m) << ","
        << to_text(r.snr_db) << "," << r.noise_kind << "," << r.split << "\n";
  }
}

inline std::vector<ManifestRow> read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kManifestHeader) throw DataError("manifest header mismatch");
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw DataError("manifest line " + std::to_string(line_no) + ": expected 6 fields");
    ManifestRow r;
    try {
      r.path = f[0];
      r.azimuth_deg = parse_value<double>("azimuth_deg", f[1]);
      r.distance_m = parse_value<double>("distance_m", f[2]);
      r.snr_db = parse_value<double>("snr_db", f[3]);
    } catch (const std::invalid_argument& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    r.noise_kind = f[4];
    r.split = f[5];
    if (r.split != "train" && r.split != "test") {
      throw DataError("manifest line " + std::to_string(line_no) + ": split must be train or test");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void save_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_manifest(out, rows);
}

inline std::vector<ManifestRow> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_manifest(in);
}

/// Resolves a manifest entry relative to the manifest's own directory.
inline std::string resolve_manifest_path(const std::string& manifest_path, const std::string& entry) {
  const std::filesystem::path p(entry);
  if (p.is_absolute()) return entry;
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

}  // namespace mtpc

#endif  // MTPC_MANIFEST_HPP_
