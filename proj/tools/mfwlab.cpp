// Copyright 2026 The mfwlab Authors
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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfwlab/error.hpp"
#include "mfwlab/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitAborted = 2;

int do_run(const std::string& config, std::optional<std::uint64_t> seed,
           std::optional<std::string> out) {
  mfw::RunOverrides overrides;
  overrides.seed = seed;
  overrides.out = std::move(out);
  const mfw::RunOutcome outcome = mfw::run(config, overrides);
  if (!outcome.ok) {
    std::cerr << "training aborted: " << outcome.summary.value("error", "") << "\n"
              << "partial artifact: " << outcome.dir.string() << "\n";
    return kExitAborted;
  }
  const auto& final_block = outcome.summary.contains("final") ? outcome.summary["final"]
                                                              : nlohmann::json::object();
  std::cout << "artifact: " << outcome.dir.string() << "\n";
  if (final_block.contains("mean_test_accuracy")) {
    std::cout << "mean test accuracy: " << final_block["mean_test_accuracy"].get<double>() << "\n";
  }
  return kExitOk;
}

int do_compare(const std::string& a, const std::string& b, const std::string& out) {
  const nlohmann::json report = mfw::compare(a, b);
  const std::string text = report.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return kExitOk;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) throw mfw::Error("cannot write " + out);
  file << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfwlab: class-imbalance training laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  auto* run_cmd = app.add_subcommand("run", "train one configuration and write an artifact directory");
  run_cmd->add_option("config", config_path, "experiment config (TOML subset or JSON)")->required();
  run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--out", out_dir, "override output_dir");

  std::string dir_a, dir_b, report_path;
  auto* cmp_cmd = app.add_subcommand("compare", "delta report between two artifact directories");
  cmp_cmd->add_option("dirA", dir_a, "baseline artifact")->required();
  cmp_cmd->add_option("dirB", dir_b, "artifact compared against the baseline")->required();
  cmp_cmd->add_option("--out", report_path, "write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run_cmd) return do_run(config_path, seed, out_dir);
    return do_compare(dir_a, dir_b, report_path);
  } catch (const mfw::InvalidArgument& e) {
    std::cerr << e.what() << "\n";
    return kExitInvalid;
  } catch (const mfw::FormatError& e) {
    std::cerr << e.what() << "\n";
    return kExitInvalid;
  } catch (const mfw::TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}
