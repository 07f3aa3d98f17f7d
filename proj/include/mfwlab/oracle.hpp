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

#ifndef MFWLAB_ORACLE_HPP
#define MFWLAB_ORACLE_HPP

#include <optional>
#include <vector>

#include "mfwlab/tensor.hpp"

// Closed-form gradients for a binary sigmoid classifier trained on a batch of
// two samples, (x1, y1 = 1) from the major class and (x2, y2 = 0) from the
// minor class, with summed loss
//
//   l = -log sigma(w . f(z~1)) - log(1 - sigma(w . f(z~2))),
//   z~1 = (1 - l1) g1 + l1 g2,   z~2 = (1 - l2) g2 + l2 g1,
//
// where f is the identity, or f(z) = V^T z for a linear head V [dim_g, dim_f].
// These serve as ground truth for the autodiff path.

namespace mfw::oracle {

using Vec = std::vector<double>;

struct BinaryCase {
  Vec w;   // decision direction, length dim_f
  Vec g1;  // g(x1), major sample, length dim_g
  Vec g2;  // g(x2), minor sample
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::optional<Tensor> v;  // linear head; absent means identity

  /// Throws ShapeError if the vector lengths do not fit together.
  void validate() const;
};

struct FeatureGrads {
  Vec g1;
  Vec g2;
};

struct MixedGrads {
  Vec g1;
  Vec g2;
  Vec w;
  // The two summands of the classifier gradient: r1 f(z~1) and r2 f(z~2).
  Vec w_major_term;
  Vec w_minor_term;
};

double sigmoid(double a);

/// Summed binary loss for the case (used by finite-difference checks).
double binary_loss(const BinaryCase& c);

/// No mixing: grad_gi = (sigma(w . f(g_i)) - y_i) V w.
FeatureGrads erm_grads(const BinaryCase& c);

/// Mixed gradients including the cross terms for lambda2 != 0:
///   grad_g1 = (1 - l1) r1 Vw + l2 r2 Vw
///   grad_g2 = (1 - l2) r2 Vw + l1 r1 Vw
///   grad_w  = r1 f(z~1) + r2 f(z~2)
/// with r1 = sigma(w . f(z~1)) - 1 and r2 = sigma(w . f(z~2)).
MixedGrads mfw_grads(const BinaryCase& c);

/// mfw_grads for a case that carries a linear head; throws if it has none.
MixedGrads linear_head_grads(const BinaryCase& c);

struct ReductionCheck {
  bool applicable = false;  // lambda2 == 0 and x2 misclassified
  bool reduced = false;     // ||grad_g2 mixed|| <= ||grad_g2 ERM||
  double norm_mixed = 0.0;
  double norm_erm = 0.0;
};

/// Compares the minor sample's feature-gradient norm with and without mixing.
ReductionCheck check_reduction(const BinaryCase& c);

double norm(const Vec& v);
double cosine(const Vec& a, const Vec& b);

}  // namespace mfw::oracle

#endif  // MFWLAB_ORACLE_HPP
