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

// Pipeline commands behind the command-line tool. Each command reads a
// RunConfig, writes its artifacts under `out`, and drops a config.txt
// snapshot next to them.

#ifndef MTPC_COMMANDS_HPP_
#define MTPC_COMMANDS_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtpc/array_sim.hpp"
#include "mtpc/checkpoint.hpp"
#include "mtpc/encoder.hpp"
#include "mtpc/experiment.hpp"
#include "mtpc/gcc_phat.hpp"
#include "mtpc/kv_config.hpp"
#include "mtpc/manifest.hpp"
#include "mtpc/pattern_io.hpp"
#include "mtpc/wav.hpp"

namespace mtpc {

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out = "out";

  // Simulation.
  double array_side_m = 0.064;
  double speed_of_sound = 343.0;
  double sample_rate = 16000.0;
  double azimuth_start = 0.0;
  double azimuth_step = 5.0;
  int azimuth_count = 72;
  std::string distances = "1.0,1.5";
  std::string sources = "multi_tone,noise_burst";
  int n_clips = 2;
  double clip_seconds = 1.0;
  double train_fraction = 0.8;
  double snr_db = std::numeric_limits<double>::infinity();
  std::string noise_kind = "none";  // none | white | directional
  double directional_snr_min = 0.0;
  double directional_snr_max = 5.0;
  double directional_distance = 1.5;

  // Encoding.
  EncoderConfig encoder;
  double window_s = 0.170;
  double stride_s = 0.085;

  // Inputs.
  std::string manifest;
  std::string patterns;
  std::string checkpoint;
  std::string wav;

  ModelConfig model;
  TrainConfig train;
  double validation_fraction = 0.1;

  std::string eval_split = "test";
  double report_bin_deg = 5.0;

  std::string sweep = "delay_lines";  // delay_lines | channels | snr
  std::string sweep_values = "11,21,31,41,51,61";
  std::string sweep_seeds = "1";

  double max_lag_s = 0.0;  // 0 derives the bound from the array geometry

  template <class F>
  void bind(F&& f) {
    f("seed", seed);
    f("threads", threads);
    f("out", out);
    f("array_side_m", array_side_m);
    f("speed_of_sound", speed_of_sound);
    f("sample_rate", sample_rate);
    f("azimuth_start", azimuth_start);
    f("azimuth_step", azimuth_step);
    f("azimuth_count", azimuth_count);
    f("distances", distances);
    f("sources", sources);
    f("n_clips", n_clips);
    f("clip_seconds", clip_seconds);
    f("train_fraction", train_fraction);
    f("snr_db", snr_db);
    f("noise_kind", noise_kind);
    f("directional_snr_min", directional_snr_min);
    f("directional_snr_max", directional_snr_max);
    f("directional_distance", directional_distance);
    f("fft_points", encoder.fft_points);
    f("delay_lines", encoder.delay_lines);
    f("channels", encoder.channels);
    f("floor_db", encoder.floor_db);
    f("f_low_hz", encoder.f_low_hz);
    f("f_high_hz", encoder.f_high_hz);
    f("analysis_window", encoder.analysis_window);
    f("window_s", window_s);
    f("stride_s", stride_s);
    f("manifest", manifest);
    f("patterns", patterns);
    f("checkpoint", checkpoint);
    f("wav", wav);
    f("backend", model.backend);
    f("hidden", model.hidden);
    f("tau_m", model.tau_m);
    f("tau_out", model.tau_out);
    f("threshold", model.threshold);
    f("refractory_steps", model.refractory_steps);
    f("readout", model.readout);
    f("input_target", model.input_target);
    f("input_scale", model.input_scale);
    f("csnn_steps", model.csnn_steps);
    f("csnn_tau_m", model.csnn_tau_m);
    f("csnn_threshold", model.csnn_threshold);
    f("epochs", train.epochs);
    f("batch_size", train.batch_size);
    f("learning_rate", train.learning_rate);
    f("label_sigma", train.label_sigma);
    f("target_mae", train.target_mae);
    f("validation_fraction", validation_fraction);
    f("eval_split", eval_split);
    f("report_bin_deg", report_bin_deg);
    f("sweep", sweep);
    f("sweep_values", sweep_values);
    f("sweep_seeds", sweep_seeds);
    f("max_lag_s", max_lag_s);
  }

  static std::set<std::string> keys() {
    std::set<std::string> k;
    RunConfig c;
    c.bind([&](const std::string& key, auto&) { k.insert(key); });
    return k;
  }

  /// Applies `kv` on top of the current values; unknown keys are an error.
  void apply(const KeyValues& kv) {
    reject_unknown_keys(kv, keys());
    bind([&](const std::string& key, auto& field) { read_key(kv, key, field); });
    train.seed = seed;
    train.threads = threads;
  }

  KeyValues to_key_values() {
    KeyValues kv;
    bind([&](const std::string& key, auto& field) { kv[key] = to_text(field); });
    return kv;
  }

  DatasetConfig dataset() const {
    DatasetConfig d;
    d.array_side_m = array_side_m;
    d.speed_of_sound = speed_of_sound;
    d.sample_rate = sample_rate;
    d.azimuth_start = azimuth_start;
    d.azimuth_step = azimuth_step;
    d.azimuth_count = azimuth_count;
    d.distances = parse_list<double>("distances", distances);
    const auto kinds = split_list(sources);
    d.multi_tone = false;
    d.noise_burst = false;
    for (const auto& k : kinds) {
      if (k == "multi_tone") {
        d.multi_tone = true;
      } else if (k == "noise_burst") {
        d.noise_burst = true;
      } else {
        throw std::invalid_argument("unknown source kind: " + k);
      }
    }
    d.train_fraction = train_fraction;
    d.window_s = window_s;
    d.stride_s = stride_s;
    if (noise_kind == "none") {
      d.snr_db = std::numeric_limits<double>::infinity();
    } else if (noise_kind == "white") {
      d.snr_db = snr_db;
    } else if (noise_kind == "directional") {
      d.snr_db = snr_db;
      d.directional = true;
    } else {
      throw std::invalid_argument("noise_kind must be none, white or directional");
    }
    d.directional_snr_min = directional_snr_min;
    d.directional_snr_max = directional_snr_max;
    d.directional_distance = directional_distance;
    d.seed = seed;
    return d;
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  template <class T>
  static std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse_value<T>(key, item));
    if (out.empty()) throw std::invalid_argument("empty list for " + key);
    return out;
  }
};

namespace detail {

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed for " + p.string());
}

inline void echo_config(RunConfig& cfg, const std::string& command) {
  ensure_dir(cfg.out);
  write_text(std::filesystem::path(cfg.out) / "config.txt",
             "# " + command + "\n" + format_key_values(cfg.to_key_values()));
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string clip_dir_name(double azimuth, double distance) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "az_%05.1f/dist_%.2f", azimuth, distance);
  return buf;
}

inline std::string pair_name(std::pair<std::size_t, std::size_t> p) {
  return std::to_string(p.first) + "-" + std::to_string(p.second);
}

/// Pattern index written by encode: path,azimuth_deg,split
struct PatternEntry {
  std::string path;
  double azimuth = 0.0;
  std::string split;
};

inline std::vector<PatternEntry> read_pattern_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,azimuth_deg,split") {
    throw DataError("pattern index header mismatch in " + path);
  }
  std::vector<PatternEntry> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw DataError("bad pattern index line: " + line);
    out.push_back({resolve_manifest_path(path, f[0]), parse_value<double>("azimuth_deg", f[1]), f[2]});
  }
  return out;
}

inline std::vector<TrainingSample<float>> load_samples(const std::vector<PatternEntry>& index,
                                                       const std::string& split, double sigma) {
  std::vector<TrainingSample<float>> out;
  for (const auto& e : index) {
    if (e.split != split) continue;
    const auto p = load_pattern(e.path);
    out.push_back({PatternTensor<float>::from_pattern(p), gaussian_label<float>(e.azimuth, sigma), e.azimuth});
  }
  return out;
}

/// Windows of every clip in the manifest, encoded with `enc`, split by the
/// manifest's split column.
inline EncodedDataset encode_manifest(const std::string& manifest_path, const EncoderConfig& enc,
                                      double window_s, double stride_s) {
  EncodedDataset ds;
  std::map<double, MtpcEncoder> encoders;
  for (const auto& row : load_manifest(manifest_path)) {
    const auto clip = load_wav(resolve_manifest_path(manifest_path, row.path));
    auto it = encoders.find(clip.sample_rate);
    if (it == encoders.end()) it = encoders.emplace(clip.sample_rate, MtpcEncoder(enc, clip.sample_rate)).first;
    for (const auto& w : clip_windows(clip, window_s, stride_s)) {
      EncodedWindow ew{it->second.encode(w), row.azimuth_deg, row.distance_m};
      (row.split == "test" ? ds.test : ds.train).push_back(std::move(ew));
    }
  }
  return ds;
}

inline std::string log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,split,loss,mae_deg,seconds\n";
  for (const auto& l : log) {
    out += std::to_string(l.epoch) + "," + l.split + "," + to_text(l.loss) + "," + to_text(l.mae_deg) +
           "," + fixed(l.seconds, 3) + "\n";
  }
  return out;
}

}  // namespace detail

/// Renders the azimuth x distance x clip grid to WAV files plus a manifest.
inline void cmd_simulate(RunConfig cfg, std::ostream& log) {
  const auto ds = cfg.dataset();
  if (cfg.azimuth_count <= 0 || cfg.n_clips <= 0) throw std::invalid_argument("invalid grid");
  if (cfg.clip_seconds < cfg.window_s) throw std::invalid_argument("clip_seconds shorter than one window");
  const auto kinds = ds.kinds();
  if (kinds.empty()) throw std::invalid_argument("no source kinds selected");
  detail::echo_config(cfg, "simulate");
  const int windows = int(std::floor((cfg.clip_seconds - cfg.window_s) / cfg.stride_s + 1e-9)) + 1;
  const int n_train = std::clamp(int(std::lround(cfg.n_clips * cfg.train_fraction)), 0, cfg.n_clips);
  std::vector<ManifestRow> rows;
  const auto az = ds.azimuths();
  for (std::size_t a = 0; a < az.size(); ++a) {
    for (std::size_t d = 0; d < ds.distances.size(); ++d) {
      const std::string dir = detail::clip_dir_name(az[a], ds.distances[d]);
      detail::ensure_dir(std::filesystem::path(cfg.out) / dir);
      for (int i = 0; i < cfg.n_clips; ++i) {
        ClipPlan p;
        p.azimuth = az[a];
        p.distance = ds.distances[d];
        p.kind = kinds[std::size_t(i) % kinds.size()];
        p.train = i < n_train;
        p.windows = windows;
        p.duration_s = cfg.clip_seconds;
        p.snr_db = ds.snr_db;
        p.seed = derive_seed(cfg.seed, a, d, std::uint64_t(i), 0xC11B);
        if (ds.directional) {
          std::mt19937_64 rng(derive_seed(p.seed, 77));
          p.interferer_azimuth = 90.0 * double(rng() % 4);
          std::uniform_real_distribution<double> snr(ds.directional_snr_min, ds.directional_snr_max);
          p.interferer_snr_db = snr(rng);
        }
        const auto clip = render_clip(ds, p);
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03d.wav", i);
        const std::string rel = dir + "/" + name;
        save_wav((std::filesystem::path(cfg.out) / rel).string(), clip);
        ManifestRow row;
        row.path = rel;
        row.azimuth_deg = p.azimuth;
        row.distance_m = p.distance;
        row.noise_kind = cfg.noise_kind;
        row.snr_db = cfg.noise_kind == "directional" ? p.interferer_snr_db
                     : cfg.noise_kind == "white"     ? cfg.snr_db
                                                     : std::numeric_limits<double>::infinity();
        row.split = p.train ? "train" : "test";
        rows.push_back(row);
      }
    }
  }
  save_manifest((std::filesystem::path(cfg.out) / "manifest.csv").string(), rows);
  log << "simulate: wrote " << rows.size() << " clips to " << cfg.out << "\n";
}

/// Encodes every window of every manifest clip into .mtpc files. Clips that
/// fail to load or encode are recorded in errors.csv and skipped.
inline void cmd_encode(RunConfig cfg, std::ostream& log) {
  if (cfg.manifest.empty()) throw std::invalid_argument("encode needs manifest=PATH");
  const auto rows = load_manifest(cfg.manifest);
  detail::echo_config(cfg, "encode");
  const std::filesystem::path out(cfg.out);
  std::string index = "path,azimuth_deg,split\n";
  std::string errors = "path,error\n";
  std::size_t n_files = 0, n_errors = 0;
  std::map<double, MtpcEncoder> encoders;
  for (const auto& row : rows) {
    try {
      const auto clip = load_wav(resolve_manifest_path(cfg.manifest, row.path));
      auto it = encoders.find(clip.sample_rate);
      if (it == encoders.end()) {
        it = encoders.emplace(clip.sample_rate, MtpcEncoder(cfg.encoder, clip.sample_rate)).first;
      }
      const auto windows = clip_windows(clip, cfg.window_s, cfg.stride_s);
      std::filesystem::path rel(row.path);
      rel.replace_extension();
      detail::ensure_dir(out / rel.parent_path());
      for (std::size_t w = 0; w < windows.size(); ++w) {
        auto pattern = it->second.encode(windows[w]);
        pattern.label_azimuth = row.azimuth_deg;
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_w%03zu.mtpc", w);
        const std::string name = rel.string() + suffix;
        save_pattern((out / name).string(), pattern);
        index += name + "," + to_text(row.azimuth_deg) + "," + row.split + "\n";
        ++n_files;
      }
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      errors += row.path + "," + msg + "\n";
      ++n_errors;
      log << "encode: " << row.path << ": " << e.what() << "\n";
    }
  }
  detail::write_text(out / "patterns.csv", index);
  detail::write_text(out / "errors.csv", errors);
  log << "encode: wrote " << n_files << " patterns, " << n_errors << " failures\n";
}

/// Trains a model on the train split, keeps the best validation checkpoint.
inline void cmd_train(RunConfig cfg, std::ostream& log) {
  if (cfg.patterns.empty()) throw std::invalid_argument("train needs patterns=PATH");
  const auto index = detail::read_pattern_index(cfg.patterns);
  const auto all = detail::load_samples(index, "train", cfg.train.label_sigma);
  if (all.empty()) throw DataError("no training patterns in " + cfg.patterns);
  auto [train, validation] = split_validation(all, cfg.validation_fraction, cfg.seed);
  if (train.empty()) throw DataError("validation split left no training data");
  detail::echo_config(cfg, "train");
  const auto model = make_model(cfg.model, train, cfg.seed);
  const auto result = train_any(model, train, validation, cfg.train, [&](const EpochLog& l) {
    log << "epoch " << l.epoch << " " << l.split << " loss " << l.loss << " mae " << l.mae_deg << "\n";
  });
  const std::filesystem::path out(cfg.out);
  save_checkpoint((out / "checkpoint.mtpw").string(), to_checkpoint(result.best));
  detail::write_text(out / "train_log.csv", detail::log_csv(result.log));
  log << "train: best validation MAE " << result.best_mae << " at epoch " << result.best_epoch << "\n";
}

inline void write_report(const std::filesystem::path& dir, const EvalReport& report, RunConfig& cfg) {
  detail::write_text(dir / "report.csv", report.to_csv());
  KeyValues summary = cfg.to_key_values();
  summary["result.overall_mae_deg"] = to_text(report.overall_mae());
  summary["result.n"] = to_text(report.size());
  summary["result.silent"] = to_text(report.silent);
  detail::write_text(dir / "summary.txt", format_key_values(summary));
  std::string pred = "label_deg,estimate_deg\n";
  for (std::size_t i = 0; i < report.size(); ++i) {
    pred += to_text(report.labels[i]) + "," + to_text(report.estimates[i]) + "\n";
  }
  detail::write_text(dir / "predictions.csv", pred);
}

/// Scores a checkpoint on one split of an encoded pattern set.
inline void cmd_eval(RunConfig cfg, std::ostream& log) {
  if (cfg.checkpoint.empty()) throw std::invalid_argument("eval needs checkpoint=PATH");
  if (cfg.patterns.empty()) throw std::invalid_argument("eval needs patterns=PATH");
  const auto model = model_from_checkpoint(load_checkpoint(cfg.checkpoint));
  const auto index = detail::read_pattern_index(cfg.patterns);
  const auto samples = detail::load_samples(index, cfg.eval_split, cfg.train.label_sigma);
  if (samples.empty()) throw DataError("no '" + cfg.eval_split + "' patterns in " + cfg.patterns);
  detail::echo_config(cfg, "eval");
  const auto report = evaluate_any(model, samples, cfg.report_bin_deg);
  write_report(cfg.out, report, cfg);
  log << "eval: " << report.size() << " samples, MAE " << report.overall_mae() << " deg\n";
}

/// Retrains and re-evaluates across delay-line counts, channel counts or
/// noise levels; one CSV row per (value, seed).
inline void cmd_sweep(RunConfig cfg, std::ostream& log) {
  const auto values = RunConfig::parse_list<double>("sweep_values", cfg.sweep_values);
  const auto seeds = RunConfig::parse_list<std::uint64_t>("sweep_seeds", cfg.sweep_seeds);
  if (cfg.sweep != "delay_lines" && cfg.sweep != "channels" && cfg.sweep != "snr") {
    throw std::invalid_argument("sweep must be delay_lines, channels or snr");
  }
  if (cfg.sweep != "snr" && cfg.manifest.empty()) throw std::invalid_argument("sweep needs manifest=PATH");
  std::optional<AnyModel> fixed_model;
  if (cfg.sweep == "snr" && !cfg.checkpoint.empty()) {
    fixed_model = model_from_checkpoint(load_checkpoint(cfg.checkpoint));
  }
  detail::echo_config(cfg, "sweep");
  std::string csv = "parameter,value,seed,n,mae_deg\n";
  for (double v : values) {
    EncodedDataset ds;
    EncoderConfig enc = cfg.encoder;
    if (cfg.sweep == "delay_lines") {
      enc.delay_lines = static_cast<std::size_t>(v);
      ds = detail::encode_manifest(cfg.manifest, enc, cfg.window_s, cfg.stride_s);
    } else if (cfg.sweep == "channels") {
      enc.channels = static_cast<int>(v);
      ds = detail::encode_manifest(cfg.manifest, enc, cfg.window_s, cfg.stride_s);
    } else {
      auto dcfg = cfg.dataset();
      dcfg.snr_db = v;
      dcfg.windows_per_azimuth =
          int(dcfg.distances.size() * dcfg.kinds().size()) *
          std::max(1, int(std::floor((cfg.clip_seconds - cfg.window_s) / cfg.stride_s + 1e-9)) + 1) *
          cfg.n_clips;
      ds = build_dataset(dcfg, enc);
    }
    const auto train_all = to_samples<float>(ds.train, cfg.train.label_sigma);
    const auto test = to_samples<float>(ds.test, cfg.train.label_sigma);
    for (auto seed : seeds) {
      EvalReport report;
      if (fixed_model) {
        report = evaluate_any(*fixed_model, test, cfg.report_bin_deg);
      } else {
        auto [train, validation] = split_validation(train_all, cfg.validation_fraction, seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        const auto model = make_model(cfg.model, train, seed);
        const auto result = train_any(model, train, validation, tc);
        report = evaluate_any(result.best, test, cfg.report_bin_deg);
      }
      csv += cfg.sweep + "," + to_text(v) + "," + to_text(seed) + "," + to_text(report.size()) + "," +
             to_text(report.overall_mae()) + "\n";
      log << "sweep " << cfg.sweep << "=" << v << " seed " << seed << ": MAE " << report.overall_mae() << "\n";
    }
  }
  detail::write_text(std::filesystem::path(cfg.out) / "sweep.csv", csv);
}

/// GCC-PHAT delay per microphone pair, one CSV per clip.
inline void cmd_baseline(RunConfig cfg, std::ostream& log) {
  std::vector<std::pair<std::string, std::string>> jobs;  // input path, output name
  if (!cfg.wav.empty()) {
    jobs.emplace_back(cfg.wav, std::filesystem::path(cfg.wav).stem().string() + ".baseline.csv");
  } else if (!cfg.manifest.empty()) {
    for (const auto& row : load_manifest(cfg.manifest)) {
      std::filesystem::path rel(row.path);
      rel.replace_extension(".baseline.csv");
      jobs.emplace_back(resolve_manifest_path(cfg.manifest, row.path), rel.string());
    }
  } else {
    throw std::invalid_argument("baseline needs wav=PATH or manifest=PATH");
  }
  detail::echo_config(cfg, "baseline");
  const auto geometry = MicArrayGeometry::square(cfg.array_side_m, cfg.speed_of_sound);
  for (const auto& [in, name] : jobs) {
    const auto clip = load_wav(in);
    double max_lag = cfg.max_lag_s;
    if (max_lag <= 0.0) {
      double span = 0.0;
      for (const auto& a : geometry.mic_positions)
        for (const auto& b : geometry.mic_positions) span = std::max(span, distance(a, b));
      max_lag = span / cfg.speed_of_sound + 2.0 / clip.sample_rate;
    }
    std::string csv = "pair,delay_s,confidence\n";
    for (const auto& pr : mic_pairs(clip.channels())) {
      const auto est = gcc_phat(clip.samples[pr.first], clip.samples[pr.second], clip.sample_rate, max_lag);
      csv += detail::pair_name(pr) + "," + to_text(est.delay) + "," + to_text(est.confidence) + "\n";
    }
    const auto path = std::filesystem::path(cfg.out) / name;
    detail::ensure_dir(path.parent_path());
    detail::write_text(path, csv);
  }
  log << "baseline: wrote " << jobs.size() << " reports\n";
}

}  // namespace mtpc

#endif  // MTPC_COMMANDS_HPP_
