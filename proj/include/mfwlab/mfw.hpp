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

#ifndef MFWLAB_MFW_HPP
#define MFWLAB_MFW_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfwlab/autodiff.hpp"
#include "mfwlab/imbalance.hpp"
#include "mfwlab/metrics.hpp"
#include "mfwlab/model.hpp"
#include "mfwlab/rng.hpp"

namespace mfw {

/// Per-class cap on the mixing coefficient:
///   s_c = 0.5 * sigmoid((N_c - mu) / (beta * gamma))
/// with mu the geometric mean and gamma the (population) standard deviation
/// of the class counts. Larger classes get larger s; every s_c is in [0, 0.5].
struct ClassWeights {
  std::vector<double> s;
  double mu = 0.0;
  double gamma = 0.0;
  double beta_softness = 1.0;
};

/// When all counts are equal (gamma == 0) every class gets s = 0.25.
ClassWeights class_weights_s(std::span<const std::size_t> counts, double beta_softness);

/// s evaluated at an arbitrary class size under the fitted mu and gamma.
double weight_at(const ClassWeights& weights, double count);

/// Mixing plan of one batch. Sample n is mixed with sample perm[n] using
/// lambdas[n]; labels never enter the plan.
struct MixPlan {
  std::vector<std::size_t> perm;
  std::vector<double> lambdas;
};

/// Consumes one permutation(rng, B), then B Beta(alpha, alpha) draws in sample
/// order; lambdas[n] = s[labels[n]] * draw_n.
MixPlan make_mix_plan(std::span<const int> batch_labels, const ClassWeights& weights,
                      double alpha, Rng& rng);

enum class TrainMode { kErm, kMfw, kMixup };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

/// Nodes of one mixed forward pass, kept for inspection.
struct MixedBatch {
  ad::Var input;
  ad::Var intermediate;  // z = g(x)
  ad::Var mixed;         // z~
  ad::Var features;      // h(z~)
  ad::Var logits;
  ad::Var loss;
};

/// z~_n = (1 - lambda_n) z_n + lambda_n z_perm(n); loss on h(z~).
/// ERM/MFW keep the labels; MIXUP uses (1 - lambda) CE(y_n) + lambda CE(y_perm(n)).
/// ERM ignores the plan's lambdas (treats them as 0). Sample n is weighted by
/// class_loss_weights[y_n]; the loss is normalised by the sum of sample weights.
MixedBatch mixed_batch_loss(ModelGraph& graph, ad::Tape& tape, const Tensor& x_batch,
                            std::span<const int> y_batch, const MixPlan& plan,
                            std::span<const double> class_loss_weights, TrainMode mode);

/// Effective-number weights (1 - b) / (1 - b^N_c), normalised to mean 1.
std::vector<double> drw_weights(std::span<const std::size_t> counts, double beta_en);

struct TrainConfig {
  int epochs = 80;
  std::size_t batch_size = 128;
  double base_lr = 0.1;
  int warmup_epochs = 5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double alpha = 1.0;
  double beta_softness = 0.01;
  bool drw_enabled = false;
  double drw_fraction = 0.8;
  double drw_beta_en = 0.9999;
  TrainMode mode = TrainMode::kMfw;
  std::uint64_t seed = 0;
  // Diagnostic knob: MFW with s = 0 for every class.
  bool force_zero_class_weights = false;

  /// Throws InvalidArgument listing every offending field.
  void validate() const;
  /// First epoch that uses DRW weights (epochs if DRW is off).
  int drw_start_epoch() const;
};

/// Linear warmup from 0 over warmup_epochs (per step), then cosine decay from
/// base_lr reaching 0 at the final step.
double lr_at(const TrainConfig& config, int epoch, std::size_t step_in_epoch,
             std::size_t steps_per_epoch);

/// Per-epoch record of what the optimiser actually used.
struct EpochTrace {
  int epoch = 0;
  double lr_start = 0.0;
  std::vector<double> class_loss_weights;
  std::uint64_t order_hash = 0;  // FNV-1a of the epoch's sample order
  double mean_train_loss = 0.0;
  double max_lambda = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> history;
  std::vector<EpochTrace> trace;
};

// Sub-stream ids derived from TrainConfig::seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;
inline constexpr std::uint64_t kMetricsStream = 3;

/// SGD with heavy-ball momentum (v = m v + g; p -= lr v). Each epoch shuffles
/// once, walks the batches in order (last short batch kept) and builds a fresh
/// MixPlan per batch. Snapshots per `metrics.eval_every` and at the last epoch.
/// Throws TrainingAborted on a non-finite loss; `partial` (if given) then holds
/// the state reached so far.
TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const Dataset& train_set, const Dataset& test_set,
                  const MetricsConfig& metrics = {}, TrainResult* partial = nullptr);

struct AlphaTuning {
  double best_alpha = 0.0;
  std::vector<double> alphas;
  std::vector<double> heldout_balanced_accuracy;
};

/// Holds out `per_class` samples of every class larger than that, trains once
/// per alpha on the rest, and picks the alpha with the best balanced held-out
/// accuracy (first one on ties).
AlphaTuning tune_alpha(const TrainConfig& config, const ModelConfig& model_config,
                       const Dataset& train_set, std::span<const double> alphas,
                       std::size_t per_class = 3);

inline constexpr double kDefaultAlphaGrid[] = {0.1, 0.2, 0.5, 1.0, 5.0};

}  // namespace mfw

#endif  // MFWLAB_MFW_HPP
