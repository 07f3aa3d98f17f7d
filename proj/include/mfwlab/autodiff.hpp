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

#ifndef MFWLAB_AUTODIFF_HPP
#define MFWLAB_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfwlab/tensor.hpp"

namespace mfw::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t index = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so inputs always
/// precede their consumers and a reverse sweep is a valid topological order.
/// Build one tape per batch; a tape is single-threaded.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  /// Records a leaf (input, parameter or constant). Leaves receive adjoints.
  Var leaf(Tensor value);

  /// Records an interior node. `backprop` reads the node's adjoint and adds
  /// into the adjoints of its inputs.
  Var record(Tensor value, Backprop backprop);

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  const Shape& shape(Var v) const { return value(v).shape(); }

  /// Adjoint of `v` after the last backward() call.
  const Tensor& grad(Var v) const;

  /// Accumulation target used by op implementations during backward().
  Tensor& adjoint(std::size_t node) { return adjoints_[node]; }
  const Tensor& node_value(std::size_t node) const { return nodes_[node].value; }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Every node gets
  /// a (possibly zero) adjoint. Calling it twice gives identical adjoints.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
};

/// y = x W + b, with x [B, d_in], W [d_in, d_out], b [d_out].
Var affine(Tape& tape, Var x, Var w, Var b);
/// y = x W.
Var matmul(Tape& tape, Var x, Var w);
/// Elementwise max(0, x); the derivative at exactly 0 is taken as 0.
Var relu(Tape& tape, Var x);
/// (1 - lambda) z1 + lambda z2, lambda treated as a constant.
Var convex_mix(Tape& tape, Var z1, Var z2, double lambda);
/// Row-wise mixing: out[n] = (1 - lambdas[n]) z[n] + lambdas[n] z[perm[n]].
Var mix_rows(Tape& tape, Var z, std::span<const std::size_t> perm,
             std::span<const double> lambdas);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);

enum class Reduction {
  kWeightedMean,  // sum_n w_n l_n / sum_n w_n
  kSum,           // sum_n w_n l_n
};

/// Weighted softmax cross-entropy of logits [B, C] against integer labels.
/// Returns a scalar node.
Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels,
                 std::span<const double> sample_weights,
                 Reduction reduction = Reduction::kWeightedMean);

/// Label-mixing cross-entropy: per-sample loss
/// (1 - lambdas[n]) CE(n, labels_a[n]) + lambdas[n] CE(n, labels_b[n]).
Var softmax_xent_mixed(Tape& tape, Var logits, std::span<const int> labels_a,
                       std::span<const int> labels_b, std::span<const double> lambdas,
                       std::span<const double> sample_weights,
                       Reduction reduction = Reduction::kWeightedMean);

/// Central-difference gradient (f(t + h e_i) - f(t - h e_i)) / 2h per entry.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                        double step);

}  // namespace mfw::ad

#endif  // MFWLAB_AUTODIFF_HPP
