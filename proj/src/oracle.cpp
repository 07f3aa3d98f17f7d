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

#include "mfwlab/oracle.hpp"

#include <cmath>

#include "mfwlab/error.hpp"

namespace mfw::oracle {

namespace {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec axpby(double a, const Vec& x, double b, const Vec& y) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

Vec scaled(double a, const Vec& x) {
  Vec out(x);
  for (auto& v : out) v *= a;
  return out;
}

// f(z) = V^T z, or z itself.
Vec head(const BinaryCase& c, const Vec& z) {
  if (!c.v) return z;
  const Tensor& v = *c.v;
  Vec out(v.cols(), 0.0);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] += v.at(i, j) * z[i];
  }
  return out;
}

// V w, or w itself: the direction every feature gradient points along.
Vec pulled_back_w(const BinaryCase& c) {
  if (!c.v) return c.w;
  const Tensor& v = *c.v;
  Vec out(v.rows(), 0.0);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) out[i] += v.at(i, j) * c.w[j];
  }
  return out;
}

// -log sigma(a) and -log(1 - sigma(a)) without overflow.
double softplus(double a) { return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

}  // namespace

void BinaryCase::validate() const {
  if (g1.size() != g2.size()) throw ShapeError("BinaryCase: g1 and g2 differ in length");
  const std::size_t dim_f = v ? v->cols() : g1.size();
  if (v && (v->rank() != 2 || v->rows() != g1.size())) {
    throw ShapeError("BinaryCase: V must be [dim_g, dim_f], got " + to_string(v->shape()));
  }
  if (w.size() != dim_f) throw ShapeError("BinaryCase: w does not match the feature dimension");
}

double sigmoid(double a) {
  return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

double binary_loss(const BinaryCase& c) {
  c.validate();
  const Vec z1 = axpby(1.0 - c.lambda1, c.g1, c.lambda1, c.g2);
  const Vec z2 = axpby(1.0 - c.lambda2, c.g2, c.lambda2, c.g1);
  const double a1 = dot(c.w, head(c, z1));
  const double a2 = dot(c.w, head(c, z2));
  return softplus(-a1) + softplus(a2);
}

FeatureGrads erm_grads(const BinaryCase& c) {
  c.validate();
  const Vec vw = pulled_back_w(c);
  const double r1 = sigmoid(dot(c.w, head(c, c.g1))) - 1.0;
  const double r2 = sigmoid(dot(c.w, head(c, c.g2))) - 0.0;
  return {scaled(r1, vw), scaled(r2, vw)};
}

MixedGrads mfw_grads(const BinaryCase& c) {
  c.validate();
  const double l1 = c.lambda1;
  const double l2 = c.lambda2;
  const Vec z1 = axpby(1.0 - l1, c.g1, l1, c.g2);
  const Vec z2 = axpby(1.0 - l2, c.g2, l2, c.g1);
  const Vec f1 = head(c, z1);
  const Vec f2 = head(c, z2);
  const double r1 = sigmoid(dot(c.w, f1)) - 1.0;
  const double r2 = sigmoid(dot(c.w, f2)) - 0.0;
  const Vec vw = pulled_back_w(c);

  MixedGrads g;
  g.g1 = axpby((1.0 - l1) * r1, vw, l2 * r2, vw);
  g.g2 = axpby((1.0 - l2) * r2, vw, l1 * r1, vw);
  g.w_major_term = scaled(r1, f1);
  g.w_minor_term = scaled(r2, f2);
  g.w = axpby(1.0, g.w_major_term, 1.0, g.w_minor_term);
  return g;
}

MixedGrads linear_head_grads(const BinaryCase& c) {
  if (!c.v) throw InvalidArgument("linear_head_grads: case has no linear head V");
  return mfw_grads(c);
}

ReductionCheck check_reduction(const BinaryCase& c) {
  ReductionCheck out;
  const FeatureGrads erm = erm_grads(c);
  const MixedGrads mixed = mfw_grads(c);
  out.norm_erm = norm(erm.g2);
  out.norm_mixed = norm(mixed.g2);
  out.applicable = c.lambda2 == 0.0 && sigmoid(dot(c.w, head(c, c.g2))) > 0.5;
  out.reduced = out.norm_mixed <= out.norm_erm;
  return out;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

double cosine(const Vec& a, const Vec& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace mfw::oracle
