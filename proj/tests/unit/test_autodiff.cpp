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
#include <vector>

#include "mfwlab/autodiff.hpp"
#include "mfwlab/error.hpp"
#include "mfwlab/rng.hpp"

using namespace mfw;
using namespace mfw::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * normal(rng);
  return t;
}

double max_rel_error(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Builds loss(theta) on a fresh tape; returns the analytic gradient for theta.
using Builder = std::function<Var(Tape&, Var)>;

Tensor analytic(const Builder& build, const Tensor& theta) {
  Tape tape;
  Var t = tape.leaf(theta);
  Var loss = build(tape, t);
  tape.backward(loss);
  return tape.grad(t);
}

double evaluate(const Builder& build, const Tensor& theta) {
  Tape tape;
  return tape.value(build(tape, tape.leaf(theta))).item();
}

void check_fd(const Builder& build, const Tensor& theta, double tol = 1e-6) {
  const Tensor g = analytic(build, theta);
  const Tensor fd = finite_diff_grad([&](const Tensor& th) { return evaluate(build, th); }, theta, 1e-5);
  CHECK(max_rel_error(g, fd) < tol);
}

const std::vector<int> kLabels{0, 2, 1, 2};
const std::vector<double> kWeights{1.0, 0.5, 2.0, 1.0};

}  // namespace

TEST_CASE("softmax cross entropy of uniform logits is log C") {
  Tape tape;
  Var logits = tape.leaf(Tensor({4, 3}, 0.7));
  const std::vector<double> w(4, 1.0);
  Var loss = softmax_xent(tape, logits, kLabels, w);
  CHECK(tape.value(loss).item() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  tape.backward(loss);
  // d/dz = (p - onehot) / N
  CHECK(tape.grad(logits).at(0, 0) == doctest::Approx((1.0 / 3.0 - 1.0) / 4.0));
  CHECK(tape.grad(logits).at(0, 1) == doctest::Approx((1.0 / 3.0) / 4.0));
}

TEST_CASE("large logits stay finite") {
  Tape tape;
  Var logits = tape.leaf(Tensor::matrix(1, 2, {1000.0, -1000.0}));
  const std::vector<int> y{1};
  const std::vector<double> w{1.0};
  Var loss = softmax_xent(tape, logits, y, w);
  CHECK(tape.value(loss).item() == doctest::Approx(2000.0));
  tape.backward(loss);
  CHECK(tape.grad(logits).all_finite());
}

TEST_CASE("cross entropy rejects bad labels and weights") {
  Tape tape;
  Var logits = tape.leaf(Tensor({2, 3}));
  const std::vector<double> w{1.0, 1.0};
  const std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(softmax_xent(tape, logits, bad, w), InvalidArgument);
  const std::vector<int> ok{0, 1};
  const std::vector<double> neg{1.0, -1.0};
  CHECK_THROWS_AS(softmax_xent(tape, logits, ok, neg), InvalidArgument);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(softmax_xent(tape, logits, ok, zero), InvalidArgument);
  CHECK_NOTHROW(softmax_xent(tape, logits, ok, zero, Reduction::kSum));
}

TEST_CASE("finite differences: affine, relu, cross entropy") {
  Rng rng(1);
  const Tensor x = random_tensor({4, 5}, rng);
  const Tensor w = random_tensor({5, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  SUBCASE("weights") {
    check_fd([&](Tape& t, Var th) {
      return softmax_xent(t, affine(t, t.leaf(x), th, t.leaf(b)), kLabels, kWeights);
    }, w);
  }
  SUBCASE("bias") {
    check_fd([&](Tape& t, Var th) {
      return softmax_xent(t, affine(t, t.leaf(x), t.leaf(w), th), kLabels, kWeights);
    }, b);
  }
  SUBCASE("input through relu") {
    const Tensor w1 = random_tensor({5, 6}, rng);
    const Tensor w2 = random_tensor({6, 3}, rng);
    check_fd([&](Tape& t, Var th) {
      Var h = relu(t, matmul(t, th, t.leaf(w1)));
      return softmax_xent(t, matmul(t, h, t.leaf(w2)), kLabels, kWeights, Reduction::kSum);
    }, x);
  }
}

TEST_CASE("finite differences: row mixing and mixed labels") {
  Rng rng(2);
  const Tensor z = random_tensor({4, 3}, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const std::vector<double> lambdas{0.1, 0.5, 0.0, 0.3};
  check_fd([&](Tape& t, Var th) {
    return softmax_xent(t, mix_rows(t, th, perm, lambdas), kLabels, kWeights);
  }, z);
  const std::vector<int> partner{2, 0, 2, 1};
  check_fd([&](Tape& t, Var th) {
    return softmax_xent_mixed(t, th, kLabels, partner, lambdas, kWeights);
  }, z);
}

TEST_CASE("mix_rows with zero lambdas is the identity") {
  Rng rng(3);
  const Tensor z = random_tensor({4, 3}, rng);
  Tape tape;
  Var v = tape.leaf(z);
  const std::vector<std::size_t> perm{3, 2, 1, 0};
  const std::vector<double> zeros(4, 0.0);
  CHECK(tape.value(mix_rows(tape, v, perm, zeros)) == z);
  const std::vector<std::size_t> short_perm{0, 1};
  CHECK_THROWS_AS(mix_rows(tape, v, short_perm, zeros), ShapeError);
}

TEST_CASE("convex_mix splits the upstream gradient by lambda") {
  Tape tape;
  Var a = tape.leaf(Tensor::matrix(1, 2, {1.0, 2.0}));
  Var b = tape.leaf(Tensor::matrix(1, 2, {-3.0, 5.0}));
  Var m = convex_mix(tape, a, b, 0.25);
  CHECK(tape.value(m) == Tensor::matrix(1, 2, {0.75 * 1.0 + 0.25 * -3.0, 0.75 * 2.0 + 0.25 * 5.0}));
  Var w = tape.leaf(Tensor::matrix(2, 1, {1.0, 1.0}));
  Var loss = matmul(tape, m, w);
  tape.backward(loss);
  CHECK(tape.grad(a) == Tensor::matrix(1, 2, {0.75, 0.75}));
  CHECK(tape.grad(b) == Tensor::matrix(1, 2, {0.25, 0.25}));
  CHECK_THROWS_AS(convex_mix(tape, a, b, 1.5), InvalidArgument);
}

TEST_CASE("gradients are linear in the loss") {
  Rng rng(4);
  const Tensor x = random_tensor({4, 5}, rng);
  const Tensor w = random_tensor({5, 3}, rng);
  const auto base = [&](Tape& t, Var th) {
    return softmax_xent(t, matmul(t, t.leaf(x), th), kLabels, kWeights);
  };
  const Tensor g1 = analytic(base, w);
  const Tensor g3 = analytic([&](Tape& t, Var th) { return scale(t, base(t, th), 3.0); }, w);
  const Tensor g2 = analytic([&](Tape& t, Var th) {
    Var l = base(t, th);
    return add(t, l, l);
  }, w);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(g3[i] == doctest::Approx(3.0 * g1[i]).epsilon(1e-14));
    CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-14));
  }
}

TEST_CASE("tape contract") {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(tape.grad(a), InvalidArgument);
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
  Var b = tape.leaf(Tensor({3, 2}));
  CHECK_THROWS_AS(matmul(tape, a, b), ShapeError);
  CHECK_THROWS_AS(add(tape, a, b), ShapeError);
}

TEST_CASE("finite_diff_grad of a quadratic") {
  const Tensor theta = Tensor::matrix(1, 3, {1.0, -2.0, 0.5});
  const Tensor g = finite_diff_grad(
      [](const Tensor& t) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
        return s;
      },
      theta, 1e-4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0 * theta[i]).epsilon(1e-9));
}
