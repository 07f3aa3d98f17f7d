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

#include "mfwlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "mfwlab/config_text.hpp"

namespace mfw {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument([&] {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

constexpr std::uint64_t kDataStream = 4;
constexpr std::uint64_t kDumpStream = 5;
constexpr std::size_t kFeatureDumpCap = 2000;

// Typed access to one config table; remembers which keys were read so that
// leftovers can be reported as unknown.
class TableReader {
 public:
  TableReader(const json& table, std::string prefix, std::vector<std::string>& problems)
      : table_(table), prefix_(std::move(prefix)), problems_(problems) {}

  ~TableReader() {
    if (!table_.is_object()) return;
    for (const auto& [key, value] : table_.items()) {
      if (!seen_.count(key)) problems_.push_back("unknown key " + name(key));
    }
  }

  template <typename Check>
  void real(const std::string& key, double& out, Check ok, const char* rule) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number()) return bad(key, "must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d) || !ok(d)) return bad(key, rule);
    out = d;
  }

  template <typename T, typename Check>
  void integer(const std::string& key, T& out, Check ok, const char* rule) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_number_integer()) return bad(key, "must be an integer");
    const auto i = v->get<std::int64_t>();
    if (!ok(i)) return bad(key, rule);
    out = static_cast<T>(i);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_boolean()) return bad(key, "must be true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) return bad(key, "must be a string");
    out = v->get<std::string>();
  }

  void uint_list(const std::string& key, std::vector<std::size_t>& out, bool allow_empty) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_array()) return bad(key, "must be an array of positive integers");
    std::vector<std::size_t> tmp;
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() <= 0) {
        return bad(key, "must be an array of positive integers");
      }
      tmp.push_back(e.get<std::size_t>());
    }
    if (tmp.empty() && !allow_empty) return bad(key, "must not be empty");
    out = std::move(tmp);
  }

  void positive_list(const std::string& key, std::vector<double>& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_array() || v->empty()) return bad(key, "must be a non-empty array of positive numbers");
    std::vector<double> tmp;
    for (const auto& e : *v) {
      if (!e.is_number() || !(e.get<double>() > 0.0)) {
        return bad(key, "must be a non-empty array of positive numbers");
      }
      tmp.push_back(e.get<double>());
    }
    out = std::move(tmp);
  }

  void known(const std::string& key) { seen_.insert(key); }

  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  void bad(const std::string& key, const std::string& rule) {
    problems_.push_back(name(key) + " " + rule);
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!table_.is_object()) return nullptr;
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &*it;
  }

  const json& table_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

const json& section(const json& doc, const char* name, std::vector<std::string>& problems) {
  static const json empty = json::object();
  if (!doc.contains(name)) return empty;
  const json& s = doc.at(name);
  if (!s.is_object()) {
    problems.push_back(std::string("[") + name + "] must be a table");
    return empty;
  }
  return s;
}

auto positive = [](auto v) { return v > 0; };
auto nonnegative = [](auto v) { return v >= 0; };

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  std::vector<std::string> problems;
  if (!doc.is_object()) throw ConfigError({"config root must be a table"});
  ExperimentConfig c;
  {
    TableReader top(doc, "", problems);
    top.integer("seed", c.seed, nonnegative, "must be a nonnegative integer");
    top.string("output_dir", c.output_dir);
    for (const char* name : {"dataset", "model", "train", "metrics"}) top.known(name);
  }
  {
    auto& d = c.dataset;
    TableReader r(section(doc, "dataset", problems), "dataset", problems);
    std::string kind = "synthetic";
    r.string("kind", kind);
    if (kind == "synthetic") {
      d.kind = DatasetKind::kSynthetic;
    } else if (kind == "idx") {
      d.kind = DatasetKind::kIdx;
    } else {
      r.bad("kind", "must be \"synthetic\" or \"idx\"");
    }
    std::string profile = d.profile == ImbalanceKind::kStep ? "step" : "long_tailed";
    r.string("profile", profile);
    if (profile == "step") {
      d.profile = ImbalanceKind::kStep;
    } else if (profile == "long_tailed") {
      d.profile = ImbalanceKind::kLongTailed;
    } else {
      r.bad("profile", "must be \"long_tailed\" or \"step\"");
    }
    r.real("rho", d.rho, [](double v) { return v >= 1.0; }, "must be >= 1");
    r.integer("n_max", d.n_max, positive, "must be a positive integer");
    r.integer("classes", d.classes, [](std::int64_t v) { return v >= 2; }, "must be >= 2");
    r.uint_list("counts", d.counts, true);
    r.integer("dim", d.dim, positive, "must be a positive integer");
    r.real("separation", d.separation, positive, "must be positive");
    r.real("noise", d.noise, positive, "must be positive");
    r.integer("test_per_class", d.test_per_class, positive, "must be a positive integer");
    r.string("train_images", d.train_images);
    r.string("train_labels", d.train_labels);
    r.string("test_images", d.test_images);
    r.string("test_labels", d.test_labels);
    if (d.kind == DatasetKind::kSynthetic && !d.counts.empty() && d.counts.size() != d.classes) {
      r.bad("counts", "must have one entry per class (" + std::to_string(d.classes) + ")");
    }
    if (d.kind == DatasetKind::kIdx) {
      for (auto [key, path] : {std::pair{"train_images", &d.train_images},
                               std::pair{"train_labels", &d.train_labels},
                               std::pair{"test_images", &d.test_images},
                               std::pair{"test_labels", &d.test_labels}}) {
        if (path->empty()) {
          r.bad(key, "is required for kind = \"idx\"");
        } else if (!fs::exists(*path)) {
          r.bad(key, "refers to a missing file: " + *path);
        }
      }
    }
  }
  {
    TableReader r(section(doc, "model", problems), "model", problems);
    r.uint_list("layer_widths", c.layer_widths, true);
    r.integer("injection_index", c.injection_index, nonnegative, "must be a nonnegative integer");
    r.boolean("bias", c.bias);
    if (c.injection_index > c.layer_widths.size()) {
      r.bad("injection_index", "must not exceed the number of hidden layers (" +
                                   std::to_string(c.layer_widths.size()) + ")");
    }
  }
  {
    auto& t = c.train;
    TableReader r(section(doc, "train", problems), "train", problems);
    r.integer("epochs", t.epochs, positive, "must be a positive integer");
    r.integer("batch_size", t.batch_size, positive, "must be a positive integer");
    r.real("base_lr", t.base_lr, positive, "must be positive");
    r.integer("warmup_epochs", t.warmup_epochs, nonnegative, "must be a nonnegative integer");
    r.real("momentum", t.momentum, [](double v) { return v >= 0.0 && v < 1.0; }, "must be in [0, 1)");
    r.real("weight_decay", t.weight_decay, nonnegative, "must be nonnegative");
    r.real("alpha", t.alpha, positive, "must be positive");
    r.real("beta_softness", t.beta_softness, positive, "must be positive");
    r.boolean("drw_enabled", t.drw_enabled);
    r.real("drw_fraction", t.drw_fraction, [](double v) { return v > 0.0 && v <= 1.0; },
           "must be in (0, 1]");
    r.real("drw_beta_en", t.drw_beta_en, [](double v) { return v >= 0.0 && v < 1.0; },
           "must be in [0, 1)");
    std::string mode = to_string(t.mode);
    r.string("mode", mode);
    try {
      t.mode = parse_train_mode(mode);
    } catch (const InvalidArgument&) {
      r.bad("mode", "must be one of ERM, MFW, MIXUP");
    }
    r.boolean("force_zero_class_weights", t.force_zero_class_weights);
    r.boolean("tune_alpha", c.tune_alpha);
    r.positive_list("alpha_grid", c.alpha_grid);
    r.integer("holdout_per_class", c.holdout_per_class, positive, "must be a positive integer");
    if (t.warmup_epochs >= t.epochs) r.bad("warmup_epochs", "must be smaller than epochs");
  }
  {
    auto& m = c.metrics;
    TableReader r(section(doc, "metrics", problems), "metrics", problems);
    r.integer("rounds", m.deviation_rounds, positive, "must be a positive integer");
    r.integer("k", m.deviation_k, nonnegative, "must be a nonnegative integer");
    r.integer("eval_every", m.eval_every, positive, "must be a positive integer");
    r.integer("grad_batch_size", m.grad_batch_size, positive, "must be a positive integer");
  }
  c.train.seed = c.seed;
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError({"config file not found: " + path.string()});
  const std::string text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  json doc;
  try {
    if (first != std::string::npos && text[first] == '{') {
      doc = json::parse(text);
    } else {
      doc = parse_toml_subset(text);
    }
  } catch (const json::exception& e) {
    throw ConfigError({std::string("cannot parse JSON config: ") + e.what()});
  } catch (const FormatError& e) {
    throw ConfigError({e.what()});
  }
  // Relative dataset paths are relative to the config file.
  if (doc.is_object() && doc.contains("dataset") && doc["dataset"].is_object()) {
    const fs::path base = fs::absolute(path).parent_path();
    for (const char* key : {"train_images", "train_labels", "test_images", "test_labels"}) {
      auto& v = doc["dataset"];
      if (v.contains(key) && v[key].is_string()) {
        const fs::path p = v[key].get<std::string>();
        if (!p.empty() && p.is_relative()) v[key] = (base / p).lexically_normal().string();
      }
    }
  }
  return config_from_json(doc);
}

json resolved_config_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const auto& t = c.train;
  json doc;
  doc["seed"] = c.seed;
  doc["dataset"] = {
      {"kind", d.kind == DatasetKind::kIdx ? "idx" : "synthetic"},
      {"profile", d.profile == ImbalanceKind::kStep ? "step" : "long_tailed"},
      {"rho", d.rho},
      {"n_max", d.n_max},
      {"classes", d.classes},
      {"counts", d.counts},
      {"dim", d.dim},
      {"separation", d.separation},
      {"noise", d.noise},
      {"test_per_class", d.test_per_class},
      {"train_images", d.train_images},
      {"train_labels", d.train_labels},
      {"test_images", d.test_images},
      {"test_labels", d.test_labels},
  };
  doc["model"] = {{"layer_widths", c.layer_widths},
                  {"injection_index", c.injection_index},
                  {"bias", c.bias}};
  doc["train"] = {{"epochs", t.epochs},
                  {"batch_size", t.batch_size},
                  {"base_lr", t.base_lr},
                  {"warmup_epochs", t.warmup_epochs},
                  {"momentum", t.momentum},
                  {"weight_decay", t.weight_decay},
                  {"alpha", t.alpha},
                  {"beta_softness", t.beta_softness},
                  {"drw_enabled", t.drw_enabled},
                  {"drw_fraction", t.drw_fraction},
                  {"drw_beta_en", t.drw_beta_en},
                  {"mode", to_string(t.mode)},
                  {"force_zero_class_weights", t.force_zero_class_weights},
                  {"tune_alpha", c.tune_alpha},
                  {"alpha_grid", c.alpha_grid},
                  {"holdout_per_class", c.holdout_per_class}};
  doc["metrics"] = {{"rounds", c.metrics.deviation_rounds},
                    {"k", c.metrics.deviation_k},
                    {"eval_every", c.metrics.eval_every},
                    {"grad_batch_size", c.metrics.grad_batch_size}};
  return doc;
}

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  Rng rng(derive_seed(config.seed, kDataStream));
  if (d.kind == DatasetKind::kSynthetic) {
    GaussianTask task;
    task.num_classes = d.classes;
    task.dim = d.dim;
    task.class_separation = d.separation;
    task.noise_sigma = d.noise;
    task.test_per_class = d.test_per_class;
    task.train_counts = d.counts.empty()
                            ? profile_counts({d.profile, d.rho, d.n_max}, d.classes)
                            : d.counts;
    return synth_gaussian(task, rng);
  }
  Dataset full = read_idx(d.train_images, d.train_labels);
  std::vector<std::size_t> counts =
      d.counts.empty() ? profile_counts({d.profile, d.rho, d.n_max}, full.num_classes())
                       : d.counts;
  Dataset train = subsample_to_profile(full, counts, rng);
  Dataset test = align_classes(read_idx(d.test_images, d.test_labels), train);
  return {std::move(train), std::move(test)};
}

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& train) {
  ModelConfig m;
  m.input_dim = train.dim();
  m.layer_widths = config.layer_widths;
  m.injection_index = config.injection_index;
  m.num_classes = train.num_classes();
  m.bias = config.bias;
  m.validate();
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& m : history) {
    const std::size_t classes = m.per_class_train_acc.size();
    const std::string loss = format_double(m.mean_train_loss);
    for (std::size_t c = 0; c < classes; ++c) {
      out += std::to_string(m.epoch) + "," + std::to_string(c) + ",train," +
             format_double(m.per_class_train_acc[c]) + "," +
             format_double(m.classification_ratio[c]) + "," +
             format_double(m.grad_norm_per_class[c]) + "," +
             format_double(m.feature_deviation[c]) + "," + loss + "\n";
      out += std::to_string(m.epoch) + "," + std::to_string(c) + ",test," +
             format_double(m.per_class_test_acc[c]) + ",,,,\n";
    }
  }
  return out;
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(path.string() + ": unexpected metrics.csv header");
  }
  std::vector<MetricsRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw FormatError(path.string() + ": malformed row: " + line);
    auto num = [&](const std::string& s) { return s.empty() ? nan : std::stod(s); };
    MetricsRow r;
    r.epoch = std::stoi(cells[0]);
    r.cls = std::stoi(cells[1]);
    r.split = cells[2];
    r.accuracy = num(cells[3]);
    r.ratio = num(cells[4]);
    r.grad_norm = num(cells[5]);
    r.deviation = num(cells[6]);
    r.loss = num(cells[7]);
    rows.push_back(r);
  }
  return rows;
}

std::string trace_csv(const std::vector<EpochTrace>& trace) {
  std::string out = "epoch,class,loss_weight,lr_start,order_hash\n";
  for (const auto& t : trace) {
    for (std::size_t c = 0; c < t.class_loss_weights.size(); ++c) {
      out += std::to_string(t.epoch) + "," + std::to_string(c) + "," +
             format_double(t.class_loss_weights[c]) + "," + format_double(t.lr_start) + "," +
             hex64(t.order_hash) + "\n";
    }
  }
  return out;
}

namespace {

std::string features_csv(const Tensor& features, const Dataset& data,
                         const std::vector<std::size_t>& rows) {
  std::string out = "index,label";
  for (std::size_t j = 0; j < features.cols(); ++j) out += ",f" + std::to_string(j);
  out += "\n";
  for (auto r : rows) {
    out += std::to_string(r) + "," + std::to_string(data.labels[r]);
    for (double v : features.row(r)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::vector<std::size_t> dump_rows(std::size_t n, Rng& rng) {
  std::vector<std::size_t> rows;
  if (n <= kFeatureDumpCap) {
    rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  } else {
    rows = sample_without_replacement(rng, n, kFeatureDumpCap);
    std::sort(rows.begin(), rows.end());
  }
  return rows;
}

json final_block(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"per_class_test_accuracy", m.per_class_test_acc},
          {"mean_test_accuracy", balanced_accuracy(m.per_class_test_acc)},
          {"per_class_train_accuracy", m.per_class_train_acc},
          {"classification_ratio", m.classification_ratio},
          {"grad_norm", m.grad_norm_per_class},
          {"feature_deviation", m.feature_deviation},
          {"mean_train_loss", m.mean_train_loss}};
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  RunOutcome outcome;
  outcome.dir = config.output_dir;
  fs::create_directories(outcome.dir);

  auto [train_set, test_set] = build_datasets(config);
  const ModelConfig model = model_config_for(config, train_set);

  TrainConfig tc = config.train;
  tc.seed = config.seed;
  json summary;
  summary["mode"] = to_string(tc.mode);
  summary["seed"] = config.seed;
  if (config.tune_alpha) {
    const AlphaTuning tuning =
        tune_alpha(tc, model, train_set, config.alpha_grid, config.holdout_per_class);
    tc.alpha = tuning.best_alpha;
    summary["alpha_tuning"] = {{"alphas", tuning.alphas},
                               {"heldout_balanced_accuracy", tuning.heldout_balanced_accuracy},
                               {"best_alpha", tuning.best_alpha}};
  }
  summary["alpha"] = tc.alpha;
  summary["train_counts"] = train_set.counts;
  summary["test_counts"] = test_set.counts;
  summary["source_class"] = train_set.source_class;
  summary["train_fingerprint"] = hex64(fingerprint(train_set));
  summary["test_fingerprint"] = hex64(fingerprint(test_set));

  TrainResult result;
  std::string failure;
  try {
    result = train(tc, model, train_set, test_set, config.metrics, &result);
  } catch (const TrainingAborted& e) {
    failure = e.what();
    outcome.ok = false;
  }

  const std::string resolved = resolved_config_json(config).dump(2) + "\n";
  write_text(outcome.dir / "config.resolved.json", resolved);
  summary["config_hash"] = hex64(fnv1a(resolved));
  write_text(outcome.dir / "metrics.csv", metrics_csv(result.history));
  write_text(outcome.dir / "trace.csv", trace_csv(result.trace));

  std::uint64_t order = 0xCBF29CE484222325ULL;
  for (const auto& t : result.trace) order = splitmix64(order ^ t.order_hash);
  summary["data_order_hash"] = hex64(order);
  summary["epochs_completed"] = result.trace.size();

  if (outcome.ok) {
    save_checkpoint(outcome.dir / "final_params.json", result.params);
    Rng dump_rng(derive_seed(config.seed, kDumpStream));
    const Tensor train_f = extract_features(result.params, train_set.features);
    const Tensor test_f = extract_features(result.params, test_set.features);
    const auto train_rows = dump_rows(train_set.size(), dump_rng);
    const auto test_rows = dump_rows(test_set.size(), dump_rng);
    write_text(outcome.dir / "features_train.csv", features_csv(train_f, train_set, train_rows));
    write_text(outcome.dir / "features_test.csv", features_csv(test_f, test_set, test_rows));
    summary["features"] = {{"feature_dim", model.feature_dim()},
                           {"train_rows", train_rows.size()},
                           {"test_rows", test_rows.size()},
                           {"train_subsampled", train_rows.size() < train_set.size()},
                           {"test_subsampled", test_rows.size() < test_set.size()}};
    summary["status"] = "ok";
    if (!result.history.empty()) summary["final"] = final_block(result.history.back());
  } else {
    summary["status"] = "failed";
    summary["error"] = failure;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  summary["wall_clock_seconds"] = elapsed;
  write_text(outcome.dir / "summary.json", summary.dump(2) + "\n");
  outcome.summary = std::move(summary);
  return outcome;
}

RunOutcome run(const fs::path& config_path, const RunOverrides& overrides) {
  ExperimentConfig config = load_config(config_path);
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.train.seed = *overrides.seed;
  }
  if (overrides.out) config.output_dir = *overrides.out;
  return run_experiment(config);
}

json compare(const fs::path& dir_a, const fs::path& dir_b) {
  const json sa = json::parse(read_text(dir_a / "summary.json"));
  const json sb = json::parse(read_text(dir_b / "summary.json"));
  for (const char* key : {"train_fingerprint", "test_fingerprint"}) {
    if (sa.value(key, "") != sb.value(key, "")) {
      throw InvalidArgument(std::string("compare: artifacts use different datasets (") + key +
                            " " + sa.value(key, "?") + " vs " + sb.value(key, "?") + ")");
    }
  }
  const auto rows_a = read_metrics_csv(dir_a / "metrics.csv");
  const auto rows_b = read_metrics_csv(dir_b / "metrics.csv");
  using Key = std::tuple<int, int, std::string>;
  std::map<Key, MetricsRow> index_b;
  for (const auto& r : rows_b) index_b[{r.epoch, r.cls, r.split}] = r;

  auto delta = [](double a, double b) -> json {
    if (std::isnan(a) || std::isnan(b)) return nullptr;
    return b - a;
  };

  json per_epoch = json::array();
  int last_epoch = -1;
  for (const auto& a : rows_a) {
    auto it = index_b.find({a.epoch, a.cls, a.split});
    if (it == index_b.end()) continue;
    const auto& b = it->second;
    last_epoch = std::max(last_epoch, a.epoch);
    per_epoch.push_back({{"epoch", a.epoch},
                         {"class", a.cls},
                         {"split", a.split},
                         {"accuracy", delta(a.accuracy, b.accuracy)},
                         {"ratio", delta(a.ratio, b.ratio)},
                         {"grad_norm", delta(a.grad_norm, b.grad_norm)},
                         {"deviation", delta(a.deviation, b.deviation)},
                         {"loss", delta(a.loss, b.loss)}});
  }

  const auto counts = sa.at("train_counts").get<std::vector<std::size_t>>();
  double log_mean = 0.0;
  for (auto n : counts) log_mean += std::log(static_cast<double>(n));
  const double mu = std::exp(log_mean / static_cast<double>(counts.size()));
  std::vector<int> minor;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (static_cast<double>(counts[c]) < mu) minor.push_back(static_cast<int>(c));
  }

  json final_rows = json::array();
  double minor_dev = 0.0, minor_grad = 0.0, test_acc_delta = 0.0;
  std::size_t grad_samples = 0;
  for (const auto& e : per_epoch) {
    const int c = e["class"].get<int>();
    if (e["split"] == "train" && std::count(minor.begin(), minor.end(), c) &&
        !e["grad_norm"].is_null()) {
      minor_grad += e["grad_norm"].get<double>();
      ++grad_samples;
    }
    if (e["epoch"].get<int>() != last_epoch) continue;
    final_rows.push_back(e);
    if (e["split"] == "test") test_acc_delta += e["accuracy"].get<double>();
    if (e["split"] == "train" && std::count(minor.begin(), minor.end(), c)) {
      minor_dev += e["deviation"].get<double>();
    }
  }
  // Mean over shared epochs of (mean minor grad norm) / (mean major grad norm).
  auto grad_ratio = [&](const std::vector<MetricsRow>& rows) {
    std::map<int, std::pair<double, double>> sums;
    for (const auto& r : rows) {
      if (r.split != "train" || std::isnan(r.grad_norm)) continue;
      const bool is_minor = std::count(minor.begin(), minor.end(), r.cls) > 0;
      (is_minor ? sums[r.epoch].first : sums[r.epoch].second) += r.grad_norm;
    }
    std::map<int, double> out;
    const double n_minor = static_cast<double>(minor.size());
    const double n_major = static_cast<double>(counts.size() - minor.size());
    for (const auto& [epoch, s] : sums) {
      if (n_minor > 0 && n_major > 0 && s.second > 0.0) {
        out[epoch] = (s.first / n_minor) / (s.second / n_major);
      }
    }
    return out;
  };
  const auto ratio_a = grad_ratio(rows_a);
  const auto ratio_b = grad_ratio(rows_b);
  double ratio_delta = 0.0;
  std::size_t ratio_epochs = 0;
  for (const auto& [epoch, ra] : ratio_a) {
    auto it = ratio_b.find(epoch);
    if (it == ratio_b.end()) continue;
    ratio_delta += it->second - ra;
    ++ratio_epochs;
  }

  json report;
  report["a"] = dir_a.string();
  report["b"] = dir_b.string();
  report["minor_classes"] = minor;
  report["per_epoch"] = std::move(per_epoch);
  report["final"] = {{"epoch", last_epoch}, {"rows", std::move(final_rows)}};
  report["summary"] = {
      {"balanced_test_accuracy_delta",
       counts.empty() ? 0.0 : test_acc_delta / static_cast<double>(counts.size())},
      {"minor_final_deviation_delta_mean",
       minor.empty() ? 0.0 : minor_dev / static_cast<double>(minor.size())},
      {"minor_grad_norm_delta_mean",
       grad_samples == 0 ? 0.0 : minor_grad / static_cast<double>(grad_samples)},
      {"minor_major_grad_ratio_delta_mean",
       ratio_epochs == 0 ? 0.0 : ratio_delta / static_cast<double>(ratio_epochs)}};
  return report;
}

}  // namespace mfw
