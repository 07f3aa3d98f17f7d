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

#ifndef MFWLAB_EXPERIMENT_HPP
#define MFWLAB_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfwlab/error.hpp"
#include "mfwlab/imbalance.hpp"
#include "mfwlab/metrics.hpp"
#include "mfwlab/mfw.hpp"
#include "mfwlab/model.hpp"

// Seeded experiment runner behind the `mfwlab` command line tool.
//
// Artifact directory layout (all text, deterministic given the config):
//   config.resolved.json   every setting after defaults; feed it back to `run`
//   metrics.csv            epoch,class,split,accuracy,ratio,grad_norm,deviation,loss
//   trace.csv              epoch,class,loss_weight,lr_start,order_hash
//   final_params.json      model checkpoint
//   features_train.csv     index,label,f0..f{d-1} (final model, at most 2000 rows)
//   features_test.csv
//   summary.json           final accuracies, deviation, fingerprints, config hash, timing

namespace mfw {

class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class DatasetKind { kSynthetic, kIdx };

struct DatasetSection {
  DatasetKind kind = DatasetKind::kSynthetic;
  ImbalanceKind profile = ImbalanceKind::kStep;
  double rho = 100.0;
  std::size_t n_max = 2000;
  std::size_t classes = 4;
  std::vector<std::size_t> counts;  // explicit counts override the profile
  std::size_t dim = 16;
  double separation = 1.0;
  double noise = 1.0;
  std::size_t test_per_class = 500;
  std::string train_images, train_labels, test_images, test_labels;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DatasetSection dataset;
  std::vector<std::size_t> layer_widths{64, 64, 32};
  std::size_t injection_index = 2;
  bool bias = true;
  TrainConfig train;
  bool tune_alpha = false;
  std::vector<double> alpha_grid{std::begin(kDefaultAlphaGrid), std::end(kDefaultAlphaGrid)};
  std::size_t holdout_per_class = 3;
  MetricsConfig metrics;
};

/// Validates every field and reports all problems at once (ConfigError).
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Reads a TOML-subset file, or JSON when the text starts with '{'.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every setting except output_dir.
nlohmann::json resolved_config_json(const ExperimentConfig& config);

/// Train/test sets described by the dataset section.
std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config);
ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& train);

struct RunOutcome {
  std::filesystem::path dir;
  bool ok = true;
  nlohmann::json summary;
};

/// Runs one experiment and writes its artifact directory. A training abort
/// still writes the artifact (summary status "failed") and returns ok = false.
RunOutcome run_experiment(const ExperimentConfig& config);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

RunOutcome run(const std::filesystem::path& config_path, const RunOverrides& overrides = {});

/// Delta report (b - a) between two artifacts of the same dataset.
nlohmann::json compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

/// Parsed metrics.csv row; absent cells are NaN.
struct MetricsRow {
  int epoch = 0;
  int cls = 0;
  std::string split;
  double accuracy = 0, ratio = 0, grad_norm = 0, deviation = 0, loss = 0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,class,split,accuracy,ratio,grad_norm,deviation,loss";

std::string metrics_csv(const std::vector<EpochMetrics>& history);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
std::string trace_csv(const std::vector<EpochTrace>& trace);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace mfw

#endif  // MFWLAB_EXPERIMENT_HPP
