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

#include "mfwlab/mfw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mfwlab/error.hpp"

namespace mfw {

ClassWeights class_weights_s(std::span<const std::size_t> counts, double beta_softness) {
  if (counts.empty()) throw InvalidArgument("class_weights_s: need at least one class");
  if (!(beta_softness > 0.0)) throw InvalidArgument("class_weights_s: beta must be positive");
  for (auto n : counts) {
    if (n == 0) throw InvalidArgument("class_weights_s: class counts must be positive");
  }
  const double classes = static_cast<double>(counts.size());
  double log_sum = 0.0;
  double sum = 0.0;
  for (auto n : counts) {
    log_sum += std::log(static_cast<double>(n));
    sum += static_cast<double>(n);
  }
  const double mean = sum / classes;
  double var = 0.0;
  for (auto n : counts) {
    const double d = static_cast<double>(n) - mean;
    var += d * d;
  }
  ClassWeights w;
  w.mu = std::exp(log_sum / classes);
  w.gamma = std::sqrt(var / classes);
  w.beta_softness = beta_softness;
  w.s.resize(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w.s[c] = weight_at(w, static_cast<double>(counts[c]));
  }
  return w;
}

double weight_at(const ClassWeights& weights, double count) {
  if (weights.gamma == 0.0) return 0.25;
  const double a = (count - weights.mu) / (weights.beta_softness * weights.gamma);
  return 0.5 / (1.0 + std::exp(-a));
}

MixPlan make_mix_plan(std::span<const int> batch_labels, const ClassWeights& weights,
                      double alpha, Rng& rng) {
  MixPlan plan;
  plan.perm = permutation(rng, batch_labels.size());
  plan.lambdas.resize(batch_labels.size());
  for (std::size_t n = 0; n < batch_labels.size(); ++n) {
    const double draw = beta_sample(rng, alpha);
    plan.lambdas[n] = weights.s.at(static_cast<std::size_t>(batch_labels[n])) * draw;
  }
  return plan;
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kErm: return "ERM";
    case TrainMode::kMfw: return "MFW";
    case TrainMode::kMixup: return "MIXUP";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& text) {
  std::string up = text;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "ERM") return TrainMode::kErm;
  if (up == "MFW") return TrainMode::kMfw;
  if (up == "MIXUP") return TrainMode::kMixup;
  throw InvalidArgument("unknown training mode '" + text + "' (expected ERM, MFW or MIXUP)");
}

MixedBatch mixed_batch_loss(ModelGraph& graph, ad::Tape& tape, const Tensor& x_batch,
                            std::span<const int> y_batch, const MixPlan& plan,
                            std::span<const double> class_loss_weights, TrainMode mode) {
  const std::size_t batch = y_batch.size();
  if (plan.perm.size() != batch || plan.lambdas.size() != batch) {
    throw ShapeError("mixed_batch_loss: plan size " + std::to_string(plan.perm.size()) +
                     " != batch size " + std::to_string(batch));
  }
  std::vector<double> sample_w(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const auto y = static_cast<std::size_t>(y_batch[n]);
    if (y_batch[n] < 0 || y >= class_loss_weights.size()) {
      throw InvalidArgument("mixed_batch_loss: label " + std::to_string(y_batch[n]) +
                            " has no loss weight");
    }
    sample_w[n] = class_loss_weights[y];
  }
  const std::vector<double> zeros(batch, 0.0);
  std::span<const double> lambdas =
      mode == TrainMode::kErm ? std::span<const double>(zeros) : std::span<const double>(plan.lambdas);

  MixedBatch out;
  out.input = graph.input(x_batch);
  out.intermediate = graph.features_g(out.input);
  out.mixed = ad::mix_rows(tape, out.intermediate, plan.perm, lambdas);
  out.features = graph.head_h(out.mixed);
  out.logits = graph.logits(out.features);
  if (mode == TrainMode::kMixup) {
    std::vector<int> partner(batch);
    for (std::size_t n = 0; n < batch; ++n) partner[n] = y_batch[plan.perm[n]];
    out.loss = ad::softmax_xent_mixed(tape, out.logits, y_batch, partner, lambdas, sample_w);
  } else {
    out.loss = ad::softmax_xent(tape, out.logits, y_batch, sample_w);
  }
  return out;
}

std::vector<double> drw_weights(std::span<const std::size_t> counts, double beta_en) {
  if (!(beta_en >= 0.0 && beta_en < 1.0)) {
    throw InvalidArgument("drw_weights: beta_en must lie in [0, 1)");
  }
  std::vector<double> w(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw InvalidArgument("drw_weights: class counts must be positive");
    w[c] = (1.0 - beta_en) / (1.0 - std::pow(beta_en, static_cast<double>(counts[c])));
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (auto& v : w) v /= mean;
  return w;
}

void TrainConfig::validate() const {
  std::vector<std::string> bad;
  if (epochs <= 0) bad.push_back("epochs must be positive");
  if (batch_size == 0) bad.push_back("batch_size must be positive");
  if (!(base_lr > 0.0)) bad.push_back("base_lr must be positive");
  if (warmup_epochs < 0 || (epochs > 0 && warmup_epochs >= epochs)) {
    bad.push_back("warmup_epochs must be in [0, epochs)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) bad.push_back("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) bad.push_back("weight_decay must be nonnegative");
  if (!(alpha > 0.0)) bad.push_back("alpha must be positive");
  if (!(beta_softness > 0.0)) bad.push_back("beta_softness must be positive");
  if (!(drw_fraction > 0.0 && drw_fraction <= 1.0)) bad.push_back("drw_fraction must be in (0, 1]");
  if (!(drw_beta_en >= 0.0 && drw_beta_en < 1.0)) bad.push_back("drw_beta_en must be in [0, 1)");
  if (!bad.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw InvalidArgument(msg);
  }
}

int TrainConfig::drw_start_epoch() const {
  if (!drw_enabled) return epochs;
  // Small slack so that e.g. 0.29 * 100 lands on 29, not 28.
  return static_cast<int>(std::floor(drw_fraction * epochs + 1e-9));
}

double lr_at(const TrainConfig& config, int epoch, std::size_t step_in_epoch,
             std::size_t steps_per_epoch) {
  const double spe = static_cast<double>(steps_per_epoch);
  const double step = static_cast<double>(step_in_epoch);
  if (epoch < config.warmup_epochs) {
    return config.base_lr * (epoch * spe + step) / (config.warmup_epochs * spe);
  }
  const double k = (epoch - config.warmup_epochs) * spe + step;
  const double total = (config.epochs - config.warmup_epochs) * spe;
  const double progress = total > 1.0 ? k / (total - 1.0) : 0.0;
  return config.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

std::uint64_t hash_order(const std::vector<std::size_t>& order) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto v : order) {
    for (int b = 0; b < 8; ++b) {
      h ^= (static_cast<std::uint64_t>(v) >> (8 * b)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace

TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const Dataset& train_set, const Dataset& test_set,
                  const MetricsConfig& metrics, TrainResult* partial) {
  config.validate();
  model_config.validate();
  train_set.validate();
  if (train_set.num_classes() != model_config.num_classes ||
      test_set.num_classes() != model_config.num_classes) {
    throw InvalidArgument("train: dataset class count does not match the model");
  }
  if (train_set.dim() != model_config.input_dim || test_set.dim() != model_config.input_dim) {
    throw InvalidArgument("train: dataset dimension does not match model input_dim");
  }

  Rng init_rng(derive_seed(config.seed, kInitStream));
  Rng rng(derive_seed(config.seed, kTrainStream));
  const std::uint64_t metrics_seed = derive_seed(config.seed, kMetricsStream);

  TrainResult result;
  result.params = init_params(model_config, init_rng);
  ModelParams& params = result.params;
  ModelParams velocity = ModelParams::zeros(model_config);

  ClassWeights s = class_weights_s(train_set.counts, config.beta_softness);
  if (config.force_zero_class_weights) std::fill(s.s.begin(), s.s.end(), 0.0);
  const std::vector<double> unit(model_config.num_classes, 1.0);
  const std::vector<double> drw = drw_weights(train_set.counts, config.drw_beta_en);
  const int drw_start = config.drw_start_epoch();

  const std::size_t n = train_set.size();
  const std::size_t steps = (n + config.batch_size - 1) / config.batch_size;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<double>& class_w = epoch >= drw_start ? drw : unit;
    const auto order = permutation(rng, n);
    EpochTrace tr;
    tr.epoch = epoch;
    tr.lr_start = lr_at(config, epoch, 0, steps);
    tr.class_loss_weights = class_w;
    tr.order_hash = hash_order(order);

    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t begin = step * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      std::vector<int> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = train_set.labels[rows[i]];

      MixPlan plan = make_mix_plan(y, s, config.alpha, rng);
      if (config.mode == TrainMode::kErm) std::fill(plan.lambdas.begin(), plan.lambdas.end(), 0.0);
      for (double l : plan.lambdas) tr.max_lambda = std::max(tr.max_lambda, l);

      ad::Tape tape;
      ModelGraph graph(tape, params);
      const MixedBatch mb = mixed_batch_loss(graph, tape, train_set.features.gather_rows(rows), y,
                                             plan, class_w, config.mode);
      const double loss = tape.value(mb.loss).item();
      if (!std::isfinite(loss)) {
        if (partial) *partial = result;
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", step " << step;
        throw TrainingAborted(msg.str(), epoch, static_cast<int>(step));
      }
      loss_sum += loss * static_cast<double>(rows.size());
      tape.backward(mb.loss);
      ModelParams grads = graph.param_grads();

      const double lr = lr_at(config, epoch, step, steps);
      auto p_list = params.tensors();
      auto g_list = grads.tensors();
      auto v_list = velocity.tensors();
      for (std::size_t t = 0; t < p_list.size(); ++t) {
        Tensor& p = *p_list[t];
        const Tensor& g = *g_list[t];
        Tensor& v = *v_list[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double gi = g[i] + config.weight_decay * p[i];
          v[i] = config.momentum * v[i] + gi;
          p[i] -= lr * v[i];
        }
      }
    }
    tr.mean_train_loss = loss_sum / static_cast<double>(n);
    result.trace.push_back(tr);

    const bool last = epoch + 1 == config.epochs;
    if (metrics.eval_every > 0 && ((epoch + 1) % metrics.eval_every == 0 || last)) {
      result.history.push_back(
          snapshot(params, train_set, test_set, metrics, epoch, tr.mean_train_loss, metrics_seed));
    }
  }
  return result;
}

AlphaTuning tune_alpha(const TrainConfig& config, const ModelConfig& model_config,
                       const Dataset& train_set, std::span<const double> alphas,
                       std::size_t per_class) {
  if (alphas.empty()) throw InvalidArgument("tune_alpha: empty alpha grid");
  constexpr std::uint64_t kHoldoutStream = 6;
  Rng rng(derive_seed(config.seed, kHoldoutStream));
  auto [fit, held] = split_holdout(train_set, per_class, rng);
  if (held.size() == 0) throw InvalidArgument("tune_alpha: no class is large enough to hold out");

  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < held.num_classes(); ++c) {
    if (held.counts[c] > 0) present.push_back(c);
  }
  MetricsConfig no_metrics;
  no_metrics.eval_every = 0;

  AlphaTuning out;
  double best = -1.0;
  for (double alpha : alphas) {
    TrainConfig cfg = config;
    cfg.alpha = alpha;
    const TrainResult r = train(cfg, model_config, fit, fit, no_metrics);
    const auto pred = predict(r.params, held.features);
    double acc = 0.0;
    for (auto c : present) {
      std::size_t hit = 0, total = 0;
      for (std::size_t i = 0; i < held.size(); ++i) {
        if (static_cast<std::size_t>(held.labels[i]) != c) continue;
        ++total;
        if (pred[i] == held.labels[i]) ++hit;
      }
      acc += static_cast<double>(hit) / static_cast<double>(total);
    }
    acc /= static_cast<double>(present.size());
    out.alphas.push_back(alpha);
    out.heldout_balanced_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      out.best_alpha = alpha;
    }
  }
  return out;
}

}  // namespace mfw
