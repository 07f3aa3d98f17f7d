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

#include "mfwlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfwlab/autodiff.hpp"
#include "mfwlab/kernels.hpp"

namespace mfw {

std::vector<double> accuracy_from_predictions(std::span<const int> predictions,
                                              std::span<const int> labels,
                                              std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("accuracy: prediction/label length mismatch");
  }
  std::vector<std::size_t> hit(num_classes, 0), total(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    ++total[y];
    if (predictions[i] == labels[i]) ++hit[y];
  }
  std::vector<double> acc(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (total[c] == 0) throw InvalidArgument("accuracy: class " + std::to_string(c) + " is empty");
    acc[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  }
  return acc;
}

std::vector<double> ratio_from_predictions(std::span<const int> predictions,
                                           std::span<const std::size_t> counts) {
  std::vector<std::size_t> predicted(counts.size(), 0);
  for (int p : predictions) ++predicted.at(static_cast<std::size_t>(p));
  std::vector<double> ratio(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    ratio[c] = static_cast<double>(predicted[c]) / static_cast<double>(counts[c]);
  }
  return ratio;
}

std::vector<double> per_class_accuracy(const ModelParams& params, const Dataset& data) {
  return accuracy_from_predictions(predict(params, data.features), data.labels,
                                   data.num_classes());
}

std::vector<double> classification_ratio(const ModelParams& params, const Dataset& train) {
  return ratio_from_predictions(predict(params, train.features), train.counts);
}

double balanced_accuracy(std::span<const double> per_class) {
  if (per_class.empty()) return 0.0;
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) /
         static_cast<double>(per_class.size());
}

std::vector<double> grad_norms_per_class(const ModelParams& params, const Dataset& train,
                                         std::size_t batch_size) {
  const std::size_t classes = train.num_classes();
  const std::size_t n = train.size();
  batch_size = std::max<std::size_t>(1, batch_size);
  std::vector<double> sum(classes, 0.0);
  std::vector<std::size_t> seen(classes, 0);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    ad::Tape tape;
    ModelGraph graph(tape, params);
    ad::Var z = graph.features_g(graph.input(train.features.gather_rows(rows)));
    ad::Var logits = graph.logits(graph.head_h(z));
    std::span<const int> labels(train.labels.data() + start, end - start);
    const std::vector<double> ones(end - start, 1.0);
    // Summed (not averaged) losses: row n of dL/dz is exactly d l_n / d z_n.
    ad::Var loss = ad::softmax_xent(tape, logits, labels, ones, ad::Reduction::kSum);
    tape.backward(loss);
    const Tensor& gz = tape.grad(z);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double sq = 0.0;
      for (double v : gz.row(r)) sq += v * v;
      const auto y = static_cast<std::size_t>(labels[r]);
      sum[y] += std::sqrt(sq);
      ++seen[y];
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (seen[c]) sum[c] /= static_cast<double>(seen[c]);
  }
  return sum;
}

Tensor l2_normalize_rows(const Tensor& features) {
  Tensor out = features;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq > 0.0) {
      const double norm = std::sqrt(sq);
      for (auto& v : row) v /= norm;
    }
  }
  return out;
}

std::vector<double> feature_deviation_from_features(const Tensor& train_features,
                                                    std::span<const int> train_labels,
                                                    const Tensor& test_features,
                                                    std::span<const int> test_labels,
                                                    std::size_t num_classes, std::size_t rounds,
                                                    std::size_t k, Rng& rng) {
  const std::size_t dim = train_features.cols();
  require_matrix(test_features, dim, "feature_deviation test features");
  if (rounds == 0) throw InvalidArgument("feature_deviation: rounds must be positive");
  if (k == 0) throw InvalidArgument("feature_deviation: K must be positive");
  std::vector<double> dis(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
      if (static_cast<std::size_t>(train_labels[i]) == c) train_rows.push_back(i);
    }
    for (std::size_t i = 0; i < test_labels.size(); ++i) {
      if (static_cast<std::size_t>(test_labels[i]) == c) test_rows.push_back(i);
    }
    if (test_rows.empty()) {
      throw InvalidArgument("feature_deviation: class " + std::to_string(c) + " has no test samples");
    }
    if (k > train_rows.size()) {
      throw InvalidArgument("feature_deviation: K=" + std::to_string(k) + " exceeds the " +
                            std::to_string(train_rows.size()) + " train samples of class " +
                            std::to_string(c));
    }
    std::vector<double> target(dim, 0.0);
    for (auto r : test_rows) {
      const auto row = test_features.row(r);
      for (std::size_t j = 0; j < dim; ++j) target[j] += row[j];
    }
    for (auto& v : target) v /= static_cast<double>(test_rows.size());

    // Draw every subset serially so the stream does not depend on threading.
    std::vector<std::size_t> subsets;
    subsets.reserve(rounds * k);
    for (std::size_t r = 0; r < rounds; ++r) {
      for (auto pick : sample_without_replacement(rng, train_rows.size(), k)) {
        subsets.push_back(train_rows[pick]);
      }
    }
    const auto distances = kernels::subset_mean_distances(train_features.data(), dim, subsets, k,
                                                          target);
    double total = 0.0;
    for (double d : distances) total += d;
    dis[c] = total / static_cast<double>(rounds);
  }
  return dis;
}

std::vector<double> feature_deviation(const ModelParams& params, const Dataset& train,
                                      const Dataset& test, std::size_t rounds, std::size_t k,
                                      Rng& rng) {
  const Tensor train_f = l2_normalize_rows(extract_features(params, train.features));
  const Tensor test_f = l2_normalize_rows(extract_features(params, test.features));
  return feature_deviation_from_features(train_f, train.labels, test_f, test.labels,
                                         train.num_classes(), rounds, k, rng);
}

EpochMetrics snapshot(const ModelParams& params, const Dataset& train, const Dataset& test,
                      const MetricsConfig& config, int epoch, double mean_train_loss,
                      std::uint64_t seed) {
  EpochMetrics m;
  m.epoch = epoch;
  const auto train_pred = predict(params, train.features);
  m.per_class_train_acc =
      accuracy_from_predictions(train_pred, train.labels, train.num_classes());
  m.classification_ratio = ratio_from_predictions(train_pred, train.counts);
  m.per_class_test_acc = per_class_accuracy(params, test);
  m.grad_norm_per_class = grad_norms_per_class(params, train, config.grad_batch_size);
  const std::size_t k = config.deviation_k
                            ? config.deviation_k
                            : *std::min_element(train.counts.begin(), train.counts.end());
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  m.feature_deviation = feature_deviation(params, train, test, config.deviation_rounds, k, rng);
  m.mean_train_loss = mean_train_loss;
  return m;
}

}  // namespace mfw
