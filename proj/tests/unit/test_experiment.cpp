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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfwlab/experiment.hpp"

using namespace mfw;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MFWLAB_SOURCE_DIR;
const fs::path kWork = fs::path(MFWLAB_BINARY_DIR) / "unit_experiment";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json small_doc() {
  return nlohmann::json::parse(R"({
    "seed": 3,
    "dataset": {"kind": "synthetic", "classes": 3, "counts": [60, 30, 6], "dim": 4,
                "separation": 2.0, "test_per_class": 12},
    "model": {"layer_widths": [8, 6], "injection_index": 1},
    "train": {"mode": "MFW", "epochs": 3, "warmup_epochs": 1, "batch_size": 16},
    "metrics": {"rounds": 20}
  })");
}

std::vector<std::string> problems_of(const nlohmann::json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults and overrides") {
  const ExperimentConfig c = config_from_json(small_doc());
  CHECK(c.seed == 3);
  CHECK(c.train.seed == 3);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.base_lr == 0.1);
  CHECK(c.layer_widths == std::vector<std::size_t>{8, 6});
  CHECK(c.metrics.deviation_rounds == 20);
  CHECK(c.dataset.counts == std::vector<std::size_t>{60, 30, 6});
}

TEST_CASE("validation reports every offending key") {
  auto doc = small_doc();
  doc["train"]["epochs"] = 0;
  doc["train"]["momentum"] = 1.5;
  doc["train"]["mode"] = "REMIX";
  doc["train"]["bogus"] = 1;
  doc["model"]["injection_index"] = 5;
  doc["dataset"]["counts"] = {1, 2};
  doc["colour"] = "red";
  const auto p = problems_of(doc);
  auto has = [&](const std::string& key) {
    for (const auto& s : p)
      if (s.find(key) != std::string::npos) return true;
    return false;
  };
  CHECK(has("train.epochs"));
  CHECK(has("train.momentum"));
  CHECK(has("train.mode"));
  CHECK(has("unknown key train.bogus"));
  CHECK(has("model.injection_index"));
  CHECK(has("dataset.counts"));
  CHECK(has("unknown key colour"));
}

TEST_CASE("idx datasets need existing files") {
  auto doc = small_doc();
  doc["dataset"] = {{"kind", "idx"}, {"train_images", "/nonexistent/a"}};
  const auto p = problems_of(doc);
  CHECK(p.size() >= 4);
}

TEST_CASE("TOML and JSON configs load the same settings") {
  fs::create_directories(kWork);
  const auto json_path = kWork / "c.json";
  std::ofstream(json_path) << small_doc().dump();
  const auto toml_path = kWork / "c.toml";
  std::ofstream(toml_path) << "seed = 3\n[dataset]\nclasses = 3\ncounts = [60, 30, 6]\ndim = 4\n"
                              "separation = 2.0\ntest_per_class = 12\n[model]\nlayer_widths = [8, 6]\n"
                              "injection_index = 1\n[train]\nmode = \"MFW\"\nepochs = 3\n"
                              "warmup_epochs = 1\nbatch_size = 16\n[metrics]\nrounds = 20\n";
  CHECK(resolved_config_json(load_config(json_path)) == resolved_config_json(load_config(toml_path)));
  CHECK_THROWS_AS(load_config(kWork / "missing.toml"), ConfigError);
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(std::nan("")) == "");
}

TEST_CASE("metrics csv schema") {
  EpochMetrics m;
  m.epoch = 2;
  m.per_class_train_acc = {1.0, 0.5};
  m.per_class_test_acc = {0.75, 0.25};
  m.classification_ratio = {1.25, 0.5};
  m.grad_norm_per_class = {0.1, 0.2};
  m.feature_deviation = {0.3, 0.4};
  m.mean_train_loss = 0.5;
  const std::string csv = metrics_csv({m});
  CHECK(csv ==
        "epoch,class,split,accuracy,ratio,grad_norm,deviation,loss\n"
        "2,0,train,1,1.25,0.1,0.3,0.5\n"
        "2,0,test,0.75,,,,\n"
        "2,1,train,0.5,0.5,0.2,0.4,0.5\n"
        "2,1,test,0.25,,,,\n");
  fs::create_directories(kWork);
  std::ofstream(kWork / "m.csv") << csv;
  const auto rows = read_metrics_csv(kWork / "m.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[2].ratio == 0.5);
  CHECK(std::isnan(rows[1].ratio));
  CHECK(rows[1].split == "test");
}

TEST_CASE("run writes a complete, reproducible artifact; compare against itself is zero") {
  ExperimentConfig c = config_from_json(small_doc());
  c.output_dir = (kWork / "run_a").string();
  const RunOutcome a = run_experiment(c);
  CHECK(a.ok);
  for (const char* f : {"config.resolved.json", "metrics.csv", "trace.csv", "final_params.json",
                        "features_train.csv", "features_test.csv", "summary.json"}) {
    CHECK(fs::exists(a.dir / f));
  }
  CHECK(a.summary["status"] == "ok");
  CHECK(a.summary["final"]["per_class_test_accuracy"].size() == 3);
  CHECK(a.summary.contains("wall_clock_seconds"));
  CHECK(load_checkpoint(a.dir / "final_params.json").config.layer_widths ==
        std::vector<std::size_t>{8, 6});

  // Re-feeding the resolved config reproduces the artifact.
  const auto rerun = run(a.dir / "config.resolved.json", {std::nullopt, (kWork / "run_b").string()});
  CHECK(slurp(a.dir / "metrics.csv") == slurp(rerun.dir / "metrics.csv"));
  CHECK(slurp(a.dir / "final_params.json") == slurp(rerun.dir / "final_params.json"));
  CHECK(slurp(a.dir / "features_test.csv") == slurp(rerun.dir / "features_test.csv"));

  const auto report = compare(a.dir, rerun.dir);
  for (const auto& row : report["per_epoch"]) {
    for (const char* k : {"accuracy", "grad_norm", "deviation"}) {
      if (!row[k].is_null()) CHECK(row[k].get<double>() == 0.0);
    }
  }
  CHECK(report["minor_classes"] == nlohmann::json::array({2}));
  for (const auto& [key, value] : report["summary"].items()) CHECK(value.get<double>() == 0.0);
  CHECK(report["summary"].contains("minor_major_grad_ratio_delta_mean"));
  CHECK(a.summary["config_hash"] == rerun.summary["config_hash"]);
  CHECK(slurp(a.dir / "config.resolved.json") == slurp(rerun.dir / "config.resolved.json"));

  const auto other = run(a.dir / "config.resolved.json", {7, (kWork / "run_c").string()});
  CHECK_THROWS_AS(compare(a.dir, other.dir), InvalidArgument);
}

TEST_CASE("a diverging run writes a failed artifact") {
  auto doc = small_doc();
  doc["train"]["base_lr"] = 1e200;
  doc["train"]["warmup_epochs"] = 0;
  ExperimentConfig c = config_from_json(doc);
  c.output_dir = (kWork / "run_fail").string();
  const RunOutcome r = run_experiment(c);
  CHECK_FALSE(r.ok);
  CHECK(r.summary["status"] == "failed");
  CHECK(fs::exists(r.dir / "summary.json"));
  CHECK(fs::exists(r.dir / "metrics.csv"));
}
