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

#include <algorithm>
#include <cmath>

#include "mfwlab/error.hpp"
#include "mfwlab/imbalance.hpp"
#include "mfwlab/mfw.hpp"

using namespace mfw;

namespace {

std::pair<Dataset, Dataset> tiny_task(std::uint64_t seed) {
  GaussianTask task;
  task.num_classes = 3;
  task.dim = 4;
  task.train_counts = {40, 20, 4};
  task.test_per_class = 10;
  task.class_separation = 2.0;
  Rng rng(seed);
  return synth_gaussian(task, rng);
}

ModelConfig tiny_model(std::size_t injection = 1) {
  ModelConfig c;
  c.input_dim = 4;
  c.layer_widths = {6, 5};
  c.injection_index = injection;
  c.num_classes = 3;
  return c;
}

}  // namespace

TEST_CASE("weight function values") {
  const std::vector<std::size_t> lt{100, 200, 400};
  const ClassWeights w = class_weights_s(lt, 2.0);
  CHECK(w.mu == doctest::Approx(200.0).epsilon(1e-14));
  CHECK(w.gamma == doctest::Approx(124.72191289246472).epsilon(1e-14));
  CHECK(std::abs(w.s[0] - 0.200549039561089) < 1e-12);
  CHECK(std::abs(w.s[1] - 0.25) < 1e-12);
  CHECK(std::abs(w.s[2] - 0.3451779540032) < 1e-12);

  const std::vector<std::size_t> step{2000, 2000, 20, 20};
  const ClassWeights s = class_weights_s(step, 0.01);
  CHECK(s.mu == doctest::Approx(200.0));
  CHECK(s.gamma == doctest::Approx(990.0));
  CHECK(std::abs(s.s[0] - 0.5) < 1e-12);
  CHECK(s.s[2] < 1e-8);

  const std::vector<std::size_t> flat{7, 7, 7};
  for (double v : class_weights_s(flat, 1.0).s) CHECK(v == 0.25);
  CHECK_THROWS_AS(class_weights_s(std::vector<std::size_t>{}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(class_weights_s(lt, 0.0), InvalidArgument);
}

TEST_CASE("mix plan: permutation first, then one scaled beta draw per sample") {
  const std::vector<int> y{0, 1, 0, 1, 1};
  ClassWeights w;
  w.s = {0.5, 0.0};
  Rng rng(3);
  const MixPlan plan = make_mix_plan(y, w, 2.0, rng);
  Rng replay(3);
  CHECK(plan.perm == permutation(replay, 5));
  for (std::size_t n = 0; n < 5; ++n) {
    const double draw = beta_sample(replay, 2.0);
    CHECK(plan.lambdas[n] == w.s[static_cast<std::size_t>(y[n])] * draw);
  }
  CHECK(plan.lambdas[1] == 0.0);
  CHECK(*std::max_element(plan.lambdas.begin(), plan.lambdas.end()) <= 0.5);
}

TEST_CASE("mode names") {
  CHECK(parse_train_mode("mfw") == TrainMode::kMfw);
  CHECK(parse_train_mode("ERM") == TrainMode::kErm);
  CHECK(parse_train_mode("MixUp") == TrainMode::kMixup);
  CHECK(to_string(TrainMode::kMixup) == "MIXUP");
  CHECK_THROWS_AS(parse_train_mode("remix"), InvalidArgument);
}

TEST_CASE("effective-number weights") {
  const std::vector<std::size_t> counts{2000, 2000, 20, 20};
  const auto w = drw_weights(counts, 0.9999);
  CHECK(std::abs(w[0] - 0.02180434098841789) < 1e-12);
  CHECK(std::abs(w[2] - 1.9781956590115821) < 1e-12);
  const auto flat = drw_weights(counts, 0.0);
  for (double v : flat) CHECK(v == doctest::Approx(1.0));
  CHECK_THROWS_AS(drw_weights(counts, 1.0), InvalidArgument);
}

TEST_CASE("schedule: warmup then cosine to zero") {
  TrainConfig c;
  c.epochs = 10;
  c.warmup_epochs = 2;
  c.base_lr = 0.1;
  CHECK(lr_at(c, 0, 0, 4) == 0.0);
  CHECK(lr_at(c, 1, 0, 4) == doctest::Approx(0.05));
  CHECK(lr_at(c, 2, 0, 4) == doctest::Approx(0.1));
  CHECK(lr_at(c, 9, 3, 4) == doctest::Approx(0.0).epsilon(1e-15));
  double prev = 1.0;
  for (int e = 2; e < 10; ++e)
    for (std::size_t s = 0; s < 4; ++s) {
      const double lr = lr_at(c, e, s, 4);
      CHECK(lr <= prev);
      prev = lr;
    }
  c.drw_enabled = true;
  c.epochs = 100;
  CHECK(c.drw_start_epoch() == 80);
  c.drw_fraction = 0.29;
  CHECK(c.drw_start_epoch() == 29);
  c.drw_enabled = false;
  CHECK(c.drw_start_epoch() == 100);
}

TEST_CASE("config validation lists every problem") {
  TrainConfig c;
  c.epochs = 0;
  c.alpha = -1.0;
  try {
    c.validate();
    FAIL("accepted");
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epochs") != std::string::npos);
    CHECK(msg.find("alpha") != std::string::npos);
  }
}

TEST_CASE("ERM plan with zero lambdas leaves features untouched") {
  Rng rng(1);
  const ModelParams p = init_params(tiny_model(), rng);
  const Tensor x = Tensor::matrix(3, 4, {1, 2, 3, 4, -1, 0, 1, 0, 0.5, 0.5, -0.5, 2});
  const std::vector<int> y{0, 1, 2};
  MixPlan plan{{2, 0, 1}, {0.3, 0.2, 0.1}};
  const std::vector<double> unit(3, 1.0);
  ad::Tape tape;
  ModelGraph g(tape, p);
  const MixedBatch erm = mixed_batch_loss(g, tape, x, y, plan, unit, TrainMode::kErm);
  CHECK(tape.value(erm.mixed) == tape.value(erm.intermediate));
  const MixedBatch mfw = mixed_batch_loss(g, tape, x, y, plan, unit, TrainMode::kMfw);
  const Tensor& z = tape.value(mfw.intermediate);
  const Tensor& zt = tape.value(mfw.mixed);
  for (std::size_t j = 0; j < z.cols(); ++j) {
    CHECK(zt.at(0, j) == doctest::Approx(0.7 * z.at(0, j) + 0.3 * z.at(2, j)));
  }
  MixPlan wrong{{0, 1}, {0.0, 0.0}};
  CHECK_THROWS_AS(mixed_batch_loss(g, tape, x, y, wrong, unit, TrainMode::kMfw), ShapeError);
}

TEST_CASE("one training step equals a hand-applied SGD update") {
  auto [train_set, test_set] = tiny_task(2);
  const ModelConfig mc = tiny_model();
  TrainConfig tc;
  tc.epochs = 1;
  tc.warmup_epochs = 0;
  tc.batch_size = 1000;
  tc.base_lr = 0.05;
  tc.momentum = 0.9;
  tc.weight_decay = 0.01;
  tc.alpha = 1.0;
  tc.seed = 11;
  MetricsConfig none;
  none.eval_every = 0;
  const TrainResult r = train(tc, mc, train_set, test_set, none);

  Rng init(derive_seed(11, kInitStream));
  ModelParams p = init_params(mc, init);
  Rng rng(derive_seed(11, kTrainStream));
  const auto order = permutation(rng, train_set.size());
  std::vector<int> y(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) y[i] = train_set.labels[order[i]];
  const MixPlan plan = make_mix_plan(y, class_weights_s(train_set.counts, tc.beta_softness), tc.alpha, rng);
  ad::Tape tape;
  ModelGraph g(tape, p);
  const std::vector<double> unit(3, 1.0);
  const MixedBatch mb = mixed_batch_loss(g, tape, train_set.features.gather_rows(order), y, plan, unit,
                                         TrainMode::kMfw);
  tape.backward(mb.loss);
  const ModelParams grads = g.param_grads();
  auto pt = p.tensors();
  auto gt = grads.tensors();
  for (std::size_t t = 0; t < pt.size(); ++t)
    for (std::size_t i = 0; i < pt[t]->size(); ++i)
      (*pt[t])[i] -= 0.05 * ((*gt[t])[i] + 0.01 * (*pt[t])[i]);
  const auto rt = r.params.tensors();
  for (std::size_t t = 0; t < pt.size(); ++t)
    for (std::size_t i = 0; i < pt[t]->size(); ++i)
      CHECK((*rt[t])[i] == doctest::Approx((*pt[t])[i]).epsilon(1e-14));
  CHECK(r.trace.size() == 1);
  CHECK(r.trace[0].mean_train_loss == doctest::Approx(tape.value(mb.loss).item()));
}

TEST_CASE("training is deterministic and ERM consumes the same data order") {
  auto [train_set, test_set] = tiny_task(3);
  TrainConfig tc;
  tc.epochs = 4;
  tc.warmup_epochs = 1;
  tc.batch_size = 16;
  tc.seed = 5;
  MetricsConfig mcfg;
  mcfg.deviation_rounds = 20;
  const TrainResult a = train(tc, tiny_model(), train_set, test_set, mcfg);
  const TrainResult b = train(tc, tiny_model(), train_set, test_set, mcfg);
  CHECK(a.params == b.params);
  CHECK(a.history == b.history);
  CHECK(a.history.size() == 4);
  tc.mode = TrainMode::kErm;
  const TrainResult e = train(tc, tiny_model(), train_set, test_set, mcfg);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].order_hash == e.trace[i].order_hash);
    CHECK(e.trace[i].max_lambda == 0.0);
  }
  CHECK(a.trace.back().max_lambda > 0.0);
  CHECK_FALSE(a.params == e.params);
}

TEST_CASE("forcing zero class weights turns MFW into ERM exactly") {
  auto [train_set, test_set] = tiny_task(4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  tc.batch_size = 8;
  tc.force_zero_class_weights = true;
  MetricsConfig mcfg;
  mcfg.deviation_rounds = 10;
  const TrainResult m = train(tc, tiny_model(), train_set, test_set, mcfg);
  tc.mode = TrainMode::kErm;
  tc.force_zero_class_weights = false;
  const TrainResult e = train(tc, tiny_model(), train_set, test_set, mcfg);
  CHECK(m.params == e.params);
  CHECK(m.history == e.history);
}

TEST_CASE("DRW weights appear in the trace at the switch epoch") {
  auto [train_set, test_set] = tiny_task(5);
  TrainConfig tc;
  tc.epochs = 10;
  tc.warmup_epochs = 1;
  tc.batch_size = 32;
  tc.drw_enabled = true;
  tc.drw_fraction = 0.8;
  MetricsConfig none;
  none.eval_every = 0;
  const TrainResult r = train(tc, tiny_model(), train_set, test_set, none);
  const auto drw = drw_weights(train_set.counts, tc.drw_beta_en);
  for (const auto& t : r.trace) {
    if (t.epoch < 8) {
      CHECK(t.class_loss_weights == std::vector<double>(3, 1.0));
    } else {
      CHECK(t.class_loss_weights == drw);
    }
  }
  CHECK(r.history.empty());
}

TEST_CASE("alpha tuning picks from the grid deterministically") {
  auto [train_set, test_set] = tiny_task(6);
  TrainConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  tc.batch_size = 16;
  const std::vector<double> grid{0.2, 2.0};
  const AlphaTuning a = tune_alpha(tc, tiny_model(), train_set, grid, 2);
  const AlphaTuning b = tune_alpha(tc, tiny_model(), train_set, grid, 2);
  CHECK(a.alphas == grid);
  CHECK(a.heldout_balanced_accuracy == b.heldout_balanced_accuracy);
  CHECK(std::find(grid.begin(), grid.end(), a.best_alpha) != grid.end());
  CHECK_THROWS_AS(tune_alpha(tc, tiny_model(), train_set, std::vector<double>{}, 2), InvalidArgument);
}

TEST_CASE("non-finite loss aborts with the epoch and a partial result") {
  auto [train_set, test_set] = tiny_task(7);
  TrainConfig tc;
  tc.epochs = 5;
  tc.warmup_epochs = 0;
  tc.base_lr = 1e200;
  tc.batch_size = 8;
  MetricsConfig none;
  none.eval_every = 0;
  TrainResult partial;
  try {
    train(tc, tiny_model(), train_set, test_set, none, &partial);
    FAIL("no abort");
  } catch (const TrainingAborted& e) {
    CHECK(e.epoch() >= 0);
    CHECK(partial.trace.size() == static_cast<std::size_t>(e.epoch()));
  }
}
