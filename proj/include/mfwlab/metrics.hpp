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

#ifndef MFWLAB_METRICS_HPP
#define MFWLAB_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfwlab/imbalance.hpp"
#include "mfwlab/model.hpp"
#include "mfwlab/rng.hpp"

// Training-progress diagnostics. Everything here evaluates the plain
// h(g(x)) path; no feature mixing is ever applied.

namespace mfw {

struct EpochMetrics {
  int epoch = 0;
  std::vector<double> per_class_train_acc;
  std::vector<double> per_class_test_acc;
  std::vector<double> classification_ratio;
  std::vector<double> grad_norm_per_class;
  std::vector<double> feature_deviation;
  double mean_train_loss = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct MetricsConfig {
  std::size_t deviation_rounds = 1000;  // R
  std::size_t deviation_k = 0;          // 0: smallest train class count
  int eval_every = 1;                   // 0 disables per-epoch snapshots
  std::size_t grad_batch_size = 256;
};

/// Fraction of class-c samples predicted as c. Throws if a class is empty.
std::vector<double> accuracy_from_predictions(std::span<const int> predictions,
                                              std::span<const int> labels,
                                              std::size_t num_classes);
/// (#samples predicted as c) / counts[c].
std::vector<double> ratio_from_predictions(std::span<const int> predictions,
                                           std::span<const std::size_t> counts);

std::vector<double> per_class_accuracy(const ModelParams& params, const Dataset& data);
std::vector<double> classification_ratio(const ModelParams& params, const Dataset& train);
/// Unweighted mean of the per-class accuracies.
double balanced_accuracy(std::span<const double> per_class);

/// Per class, the mean over its samples of || d l(x) / d g(x) ||_2 where l is
/// the single-sample cross-entropy. Batching only affects speed.
std::vector<double> grad_norms_per_class(const ModelParams& params, const Dataset& train,
                                         std::size_t batch_size);

/// Rows of `features` scaled to unit L2 norm (zero rows stay zero).
Tensor l2_normalize_rows(const Tensor& features);

/// dis(c): mean over `rounds` draws of the distance between the mean of K
/// random train features of class c and the mean of all test features of c.
/// Features are taken as given (normalise beforehand).
std::vector<double> feature_deviation_from_features(const Tensor& train_features,
                                                    std::span<const int> train_labels,
                                                    const Tensor& test_features,
                                                    std::span<const int> test_labels,
                                                    std::size_t num_classes, std::size_t rounds,
                                                    std::size_t k, Rng& rng);

/// Feature deviation on L2-normalised f(x).
std::vector<double> feature_deviation(const ModelParams& params, const Dataset& train,
                                      const Dataset& test, std::size_t rounds, std::size_t k,
                                      Rng& rng);

/// All diagnostics for one epoch. Deviation randomness comes from
/// derive_seed(seed, epoch), so the record is a pure function of its inputs.
EpochMetrics snapshot(const ModelParams& params, const Dataset& train, const Dataset& test,
                      const MetricsConfig& config, int epoch, double mean_train_loss,
                      std::uint64_t seed);

}  // namespace mfw

#endif  // MFWLAB_METRICS_HPP
