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

// mtpc <simulate|encode|train|eval|sweep|baseline> [--config PATH] [--seed N]
//      [--threads N] [--out DIR] [key=value ...]
//
// Settings merge as defaults <- config file <- key=value arguments <- flags.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtpc/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

using Command = void (*)(mtpc::RunConfig, std::ostream&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tone phase coding sound localization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::vector<std::string> overrides;

  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"simulate", {mtpc::cmd_simulate, "Render a synthetic array dataset (WAV + manifest)"}},
      {"encode", {mtpc::cmd_encode, "Encode manifest clips into spike-count patterns"}},
      {"train", {mtpc::cmd_train, "Train a spiking localizer on encoded patterns"}},
      {"eval", {mtpc::cmd_eval, "Score a checkpoint on encoded patterns"}},
      {"sweep", {mtpc::cmd_sweep, "Accuracy versus delay lines, channels or SNR"}},
      {"baseline", {mtpc::cmd_baseline, "GCC-PHAT delay estimates per microphone pair"}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "Flat key=value settings file");
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--threads", threads, "Worker thread cap");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("settings", overrides, "Extra key=value settings");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  mtpc::RunConfig cfg;
  Command run = nullptr;
  std::string name;
  for (const auto& [n, entry] : commands) {
    if (app.got_subcommand(n)) {
      run = entry.first;
      name = n;
    }
  }

  try {
    if (!config_path.empty()) cfg.apply(mtpc::load_key_values(config_path));
    std::string extra;
    for (const auto& kv : overrides) extra += kv + "\n";
    cfg.apply(mtpc::parse_key_values(extra));
    mtpc::KeyValues flags;
    if (seed) flags["seed"] = std::to_string(*seed);
    if (threads) flags["threads"] = std::to_string(*threads);
    if (out) flags["out"] = *out;
    cfg.apply(flags);
  } catch (const mtpc::DataError& e) {
    std::cerr << "mtpc " << name << ": " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "mtpc " << name << ": " << e.what() << "\n";
    return kUsage;
  }

  try {
    run(cfg, std::cerr);
  } catch (const mtpc::NumericalError& e) {
    std::cerr << "mtpc " << name << ": numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const mtpc::DataError& e) {
    std::cerr << "mtpc " << name << ": data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "mtpc " << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "mtpc " << name << ": data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
