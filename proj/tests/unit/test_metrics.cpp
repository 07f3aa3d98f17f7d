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

#include <cmath>
#include <functional>
#include <numeric>

#include "mfwlab/error.hpp"
#include "mfwlab/imbalance.hpp"
#include "mfwlab/kernels.hpp"
#include "mfwlab/metrics.hpp"

using namespace mfw;

namespace {

// Enumerates all k-subsets of {0..n-1}.
void for_each_subset(std::size_t n, std::size_t k,
                     const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (;;) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

double subset_distance(const Tensor& f, const std::vector<std::size_t>& rows,
                       const std::vector<double>& target) {
  double sq = 0.0;
  for (std::size_t j = 0; j < f.cols(); ++j) {
    double m = 0.0;
    for (auto r : rows) m += f.at(r, j);
    m /= static_cast<double>(rows.size());
    sq += (m - target[j]) * (m - target[j]);
  }
  return std::sqrt(sq);
}

Tensor random_features(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t({n, d});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return l2_normalize_rows(t);
}

}  // namespace

TEST_CASE("accuracy and classification ratio on crafted predictions") {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 2};
  const std::vector<int> preds{0, 0, 1, 2, 1, 0, 0};
  const auto acc = accuracy_from_predictions(preds, labels, 3);
  CHECK(acc == std::vector<double>{0.5, 0.5, 0.0});
  const std::vector<std::size_t> counts{4, 2, 1};
  const auto ratio = ratio_from_predictions(preds, counts);
  // Predicted tallies: class 0 four times, class 1 twice, class 2 once.
  CHECK(ratio == std::vector<double>{4.0 / 4.0, 2.0 / 2.0, 1.0 / 1.0});
  const std::vector<int> all_zero(7, 0);
  CHECK(ratio_from_predictions(all_zero, counts) == std::vector<double>{7.0 / 4.0, 0.0, 0.0});
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) total += ratio[c] * static_cast<double>(counts[c]);
  CHECK(total == 7.0);
  CHECK(balanced_accuracy(acc) == doctest::Approx(1.0 / 3.0));
  const std::vector<int> missing{0, 0, 1};
  CHECK_THROWS_AS(accuracy_from_predictions(missing, missing, 3), InvalidArgument);
}

TEST_CASE("l2 normalisation") {
  const Tensor f = l2_normalize_rows(Tensor::matrix(2, 2, {3, 4, 0, 0}));
  CHECK(f == Tensor::matrix(2, 2, {0.6, 0.8, 0, 0}));
}

TEST_CASE("deviation kernel matches exhaustive subset enumeration") {
  Rng rng(1);
  const Tensor f = random_features(7, 5, rng);
  const std::vector<double> target{0.1, -0.2, 0.3, 0.0, 0.05};
  for (std::size_t k = 1; k <= 7; ++k) {
    CAPTURE(k);
    std::vector<std::size_t> flat;
    double oracle = 0.0;
    std::size_t count = 0;
    for_each_subset(7, k, [&](const std::vector<std::size_t>& s) {
      flat.insert(flat.end(), s.begin(), s.end());
      oracle += subset_distance(f, s, target);
      ++count;
    });
    const auto d = kernels::subset_mean_distances(f.data(), 5, flat, k, target);
    REQUIRE(d.size() == count);
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(count);
    CHECK(std::abs(mean - oracle / static_cast<double>(count)) < 1e-12);
  }
}

TEST_CASE("deviation with K equal to the class size is the exact mean distance") {
  Rng rng(2);
  const Tensor train = random_features(9, 4, rng);
  const Tensor test = random_features(6, 4, rng);
  const std::vector<int> ytr{0, 0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> yte{0, 0, 0, 1, 1, 1};
  Rng draw(3);
  // K = 4 is the whole of class 1 and a strict subset of class 0.
  const auto dis = feature_deviation_from_features(train, ytr, test, yte, 2, 5, 4, draw);
  std::vector<double> target(4, 0.0);
  for (std::size_t r = 3; r < 6; ++r)
    for (std::size_t j = 0; j < 4; ++j) target[j] += test.at(r, j) / 3.0;
  CHECK(std::abs(dis[1] - subset_distance(train, {5, 6, 7, 8}, target)) < 1e-12);
}

TEST_CASE("random deviation estimate converges to the exhaustive mean and shrinks with K") {
  Rng rng(4);
  const Tensor train = random_features(8, 3, rng);
  const Tensor test = random_features(10, 3, rng);
  const std::vector<int> ytr(8, 0);
  const std::vector<int> yte(10, 0);
  std::vector<double> target(3, 0.0);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t j = 0; j < 3; ++j) target[j] += test.at(r, j) / 10.0;

  double previous = 1e9;
  for (std::size_t k = 1; k <= 8; ++k) {
    double oracle = 0.0;
    std::size_t count = 0;
    for_each_subset(8, k, [&](const std::vector<std::size_t>& s) {
      oracle += subset_distance(train, s, target);
      ++count;
    });
    oracle /= static_cast<double>(count);
    Rng draw(10 + k);
    const double est = feature_deviation_from_features(train, ytr, test, yte, 1, 20000, k, draw)[0];
    CHECK(est == doctest::Approx(oracle).epsilon(0.01));
    CHECK(oracle <= previous + 1e-12);
    previous = oracle;
  }
}

TEST_CASE("deviation argument checks") {
  Rng rng(5);
  const Tensor f = random_features(4, 2, rng);
  const std::vector<int> y{0, 0, 1, 1};
  CHECK_THROWS_AS(feature_deviation_from_features(f, y, f, y, 2, 10, 3, rng), InvalidArgument);
  CHECK_THROWS_AS(feature_deviation_from_features(f, y, f, y, 2, 0, 1, rng), InvalidArgument);
  CHECK_THROWS_AS(feature_deviation_from_features(f, y, f, y, 2, 10, 0, rng), InvalidArgument);
  const std::vector<int> no_class1{0, 0, 0, 0};
  CHECK_THROWS_AS(feature_deviation_from_features(f, y, f, no_class1, 2, 10, 1, rng),
                  InvalidArgument);
}

TEST_CASE("per-sample feature gradient norms for a linear model") {
  // With no hidden layers g(x) = x and dl/dz = W (p - e_y).
  ModelConfig c;
  c.input_dim = 2;
  c.num_classes = 2;
  ModelParams p = ModelParams::zeros(c);
  p.head = Tensor::matrix(2, 2, {1.0, -1.0, 0.5, 2.0});
  const Dataset d = make_dataset(Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}), {0, 0, 1}, 2);
  const auto norms = grad_norms_per_class(p, d, 2);
  auto sample_norm = [&](std::size_t n) {
    const double z0 = d.features.at(n, 0) * 1.0 + d.features.at(n, 1) * 0.5;
    const double z1 = d.features.at(n, 0) * -1.0 + d.features.at(n, 1) * 2.0;
    const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
    const double r0 = (1.0 - p1) - (d.labels[n] == 0 ? 1.0 : 0.0);
    const double r1 = p1 - (d.labels[n] == 1 ? 1.0 : 0.0);
    const double g0 = 1.0 * r0 + -1.0 * r1;
    const double g1 = 0.5 * r0 + 2.0 * r1;
    return std::sqrt(g0 * g0 + g1 * g1);
  };
  CHECK(norms[0] == doctest::Approx((sample_norm(0) + sample_norm(1)) / 2.0).epsilon(1e-12));
  CHECK(norms[1] == doctest::Approx(sample_norm(2)).epsilon(1e-12));
  CHECK(grad_norms_per_class(p, d, 1) == grad_norms_per_class(p, d, 100));
}

TEST_CASE("snapshot ratios account for every training sample") {
  GaussianTask task;
  task.train_counts = {60, 30, 6};
  task.num_classes = 3;
  task.dim = 4;
  task.test_per_class = 10;
  Rng rng(6);
  const auto [train, test] = synth_gaussian(task, rng);
  ModelConfig c;
  c.input_dim = 4;
  c.layer_widths = {8, 3};
  c.injection_index = 1;
  c.num_classes = 3;
  Rng init(7);
  const ModelParams p = init_params(c, init);
  MetricsConfig mc;
  mc.deviation_rounds = 50;
  const EpochMetrics m = snapshot(p, train, test, mc, 3, 0.5, 99);
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) total += m.classification_ratio[k] * static_cast<double>(train.counts[k]);
  CHECK(total == doctest::Approx(static_cast<double>(train.size())).epsilon(1e-12));
  CHECK(m == snapshot(p, train, test, mc, 3, 0.5, 99));
  CHECK(m.epoch == 3);
  CHECK(m.feature_deviation.size() == 3);
}
