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

#include "mfwlab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfwlab/error.hpp"
#include "mfwlab/kernels.hpp"

namespace mfw::ad {

Var Tape::leaf(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::record(Tensor value, Backprop backprop) {
  nodes_.push_back(Node{std::move(value), std::move(backprop)});
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::grad(Var v) const {
  if (adjoints_.size() != nodes_.size()) {
    throw InvalidArgument("Tape::grad called before backward()");
  }
  return adjoints_.at(v.index);
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(shape(loss)));
  }
  adjoints_.clear();
  adjoints_.reserve(nodes_.size());
  for (const auto& node : nodes_) adjoints_.emplace_back(node.value.shape(), 0.0);
  adjoints_[loss.index].fill(1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void check_matmul(const Tensor& x, const Tensor& w, const char* op) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0]) {
    throw ShapeError(std::string(op) + ": cannot multiply x " + to_string(x.shape()) +
                     " by W " + to_string(w.shape()));
  }
}

Tensor forward_matmul(const Tensor& x, const Tensor& w) {
  const kernels::GemmDims dims{x.shape()[0], x.shape()[1], w.shape()[1]};
  Tensor y({dims.m, dims.n});
  kernels::gemm_nn(x.data(), w.data(), y.data(), dims);
  return y;
}

void backprop_matmul(Tape& t, std::size_t self, std::size_t xi, std::size_t wi) {
  const Tensor& dy = t.adjoint(self);
  const Tensor& x = t.node_value(xi);
  const Tensor& w = t.node_value(wi);
  const std::size_t batch = x.shape()[0];
  const std::size_t d_in = x.shape()[1];
  const std::size_t d_out = w.shape()[1];
  // dx += dy W^T ; dW += x^T dy
  kernels::gemm_nt(dy.data(), w.data(), t.adjoint(xi).data(), {batch, d_out, d_in},
                   kernels::Accumulate::kAdd);
  kernels::gemm_tn(x.data(), dy.data(), t.adjoint(wi).data(), {d_in, batch, d_out},
                   kernels::Accumulate::kAdd);
}

}  // namespace

Var affine(Tape& tape, Var x, Var w, Var b) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  const Tensor& bv = tape.value(b);
  check_matmul(xv, wv, "affine");
  if (bv.rank() != 1 || bv.shape()[0] != wv.shape()[1]) {
    throw ShapeError("affine: bias " + to_string(bv.shape()) + " does not match W " +
                     to_string(wv.shape()));
  }
  Tensor y = forward_matmul(xv, wv);
  const std::size_t d_out = y.shape()[1];
  for (std::size_t r = 0; r < y.shape()[0]; ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < d_out; ++j) row[j] += bv[j];
  }
  const std::size_t xi = x.index, wi = w.index, bi = b.index;
  return tape.record(std::move(y), [xi, wi, bi](Tape& t, std::size_t self) {
    backprop_matmul(t, self, xi, wi);
    const Tensor& dy = t.adjoint(self);
    Tensor& db = t.adjoint(bi);
    const std::size_t d = db.size();
    for (std::size_t r = 0; r < dy.shape()[0]; ++r) {
      for (std::size_t j = 0; j < d; ++j) db[j] += dy[r * d + j];
    }
  });
}

Var matmul(Tape& tape, Var x, Var w) {
  check_matmul(tape.value(x), tape.value(w), "matmul");
  Tensor y = forward_matmul(tape.value(x), tape.value(w));
  const std::size_t xi = x.index, wi = w.index;
  return tape.record(std::move(y), [xi, wi](Tape& t, std::size_t self) {
    backprop_matmul(t, self, xi, wi);
  });
}

Var relu(Tape& tape, Var x) {
  Tensor y = tape.value(x);
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t xi = x.index;
  return tape.record(std::move(y), [xi](Tape& t, std::size_t self) {
    const Tensor& dy = t.adjoint(self);
    const Tensor& xv = t.node_value(xi);
    Tensor& dx = t.adjoint(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Var convex_mix(Tape& tape, Var z1, Var z2, double lambda) {
  const Tensor& a = tape.value(z1);
  const Tensor& b = tape.value(z2);
  require_same_shape(a, b, "convex_mix");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidArgument("convex_mix: lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (1.0 - lambda) * a[i] + lambda * b[i];
  const std::size_t i1 = z1.index, i2 = z2.index;
  return tape.record(std::move(y), [i1, i2, lambda](Tape& t, std::size_t self) {
    const Tensor& dy = t.adjoint(self);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      t.adjoint(i1)[i] += (1.0 - lambda) * dy[i];
      t.adjoint(i2)[i] += lambda * dy[i];
    }
  });
}

Var mix_rows(Tape& tape, Var z, std::span<const std::size_t> perm,
             std::span<const double> lambdas) {
  const Tensor& zv = tape.value(z);
  const std::size_t batch = zv.rows();
  const std::size_t d = zv.cols();
  if (perm.size() != batch || lambdas.size() != batch) {
    throw ShapeError("mix_rows: plan of size " + std::to_string(perm.size()) +
                     " does not match batch " + std::to_string(batch));
  }
  Tensor y({batch, d});
  for (std::size_t n = 0; n < batch; ++n) {
    const double lam = lambdas[n];
    if (perm[n] >= batch) throw InvalidArgument("mix_rows: partner index out of range");
    const auto own = zv.row(n);
    const auto partner = zv.row(perm[n]);
    auto out = y.row(n);
    for (std::size_t j = 0; j < d; ++j) out[j] = (1.0 - lam) * own[j] + lam * partner[j];
  }
  std::vector<std::size_t> p(perm.begin(), perm.end());
  std::vector<double> l(lambdas.begin(), lambdas.end());
  const std::size_t zi = z.index;
  return tape.record(std::move(y), [zi, p = std::move(p), l = std::move(l)](Tape& t,
                                                                            std::size_t self) {
    const Tensor& dy = t.adjoint(self);
    Tensor& dz = t.adjoint(zi);
    const std::size_t d = dz.cols();
    for (std::size_t n = 0; n < p.size(); ++n) {
      for (std::size_t j = 0; j < d; ++j) {
        dz[n * d + j] += (1.0 - l[n]) * dy[n * d + j];
        dz[p[n] * d + j] += l[n] * dy[n * d + j];
      }
    }
  });
}

Var add(Tape& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor y = tape.value(a);
  const Tensor& bv = tape.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ai = a.index, bi = b.index;
  return tape.record(std::move(y), [ai, bi](Tape& t, std::size_t self) {
    const Tensor& dy = t.adjoint(self);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      t.adjoint(ai)[i] += dy[i];
      t.adjoint(bi)[i] += dy[i];
    }
  });
}

Var scale(Tape& tape, Var a, double factor) {
  Tensor y = tape.value(a);
  for (auto& v : y.data()) v *= factor;
  const std::size_t ai = a.index;
  return tape.record(std::move(y), [ai, factor](Tape& t, std::size_t self) {
    const Tensor& dy = t.adjoint(self);
    for (std::size_t i = 0; i < dy.size(); ++i) t.adjoint(ai)[i] += factor * dy[i];
  });
}

namespace {

// Row-wise softmax probabilities and log-sum-exp of max-shifted logits.
struct SoftmaxRows {
  Tensor probs;
  std::vector<double> log_norm;  // log sum_c exp(logit_c)
};

SoftmaxRows softmax_rows(const Tensor& logits) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  SoftmaxRows out{Tensor({batch, classes}), std::vector<double>(batch)};
  for (std::size_t n = 0; n < batch; ++n) {
    const auto row = logits.row(n);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    auto p = out.probs.row(n);
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(row[c] - mx);
      sum += p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[c] /= sum;
    out.log_norm[n] = mx + std::log(sum);
  }
  return out;
}

double weight_normalizer(std::span<const double> weights, std::size_t batch,
                         Reduction reduction) {
  if (weights.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(weights.size()) + " weights for batch " +
                     std::to_string(batch));
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("softmax_xent: sample weights must be finite and nonnegative");
    }
    total += w;
  }
  if (reduction == Reduction::kSum) return 1.0;
  if (total == 0.0) throw InvalidArgument("softmax_xent: all sample weights are zero");
  return total;
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("softmax_xent: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels,
                 std::span<const double> sample_weights, Reduction reduction) {
  const Tensor& z = tape.value(logits);
  if (z.rank() != 2) throw ShapeError("softmax_xent: logits must be [B, C]");
  const std::size_t batch = z.rows();
  const std::size_t classes = z.cols();
  check_labels(labels, batch, classes);
  const double norm = weight_normalizer(sample_weights, batch, reduction);

  SoftmaxRows sm = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const auto y = static_cast<std::size_t>(labels[n]);
    loss += sample_weights[n] * (sm.log_norm[n] - z.at(n, y));
  }
  loss /= norm;

  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<double> ws(sample_weights.begin(), sample_weights.end());
  const std::size_t li = logits.index;
  return tape.record(
      Tensor::scalar(loss),
      [li, norm, probs = std::move(sm.probs), ys = std::move(ys), ws = std::move(ws)](
          Tape& t, std::size_t self) {
        const double g = t.adjoint(self)[0];
        Tensor& dz = t.adjoint(li);
        const std::size_t classes = probs.cols();
        for (std::size_t n = 0; n < ys.size(); ++n) {
          const double scale_n = g * ws[n] / norm;
          for (std::size_t c = 0; c < classes; ++c) {
            const double target = static_cast<std::size_t>(ys[n]) == c ? 1.0 : 0.0;
            dz[n * classes + c] += scale_n * (probs.at(n, c) - target);
          }
        }
      });
}

Var softmax_xent_mixed(Tape& tape, Var logits, std::span<const int> labels_a,
                       std::span<const int> labels_b, std::span<const double> lambdas,
                       std::span<const double> sample_weights, Reduction reduction) {
  const Tensor& z = tape.value(logits);
  if (z.rank() != 2) throw ShapeError("softmax_xent_mixed: logits must be [B, C]");
  const std::size_t batch = z.rows();
  const std::size_t classes = z.cols();
  check_labels(labels_a, batch, classes);
  check_labels(labels_b, batch, classes);
  if (lambdas.size() != batch) throw ShapeError("softmax_xent_mixed: lambda count mismatch");
  const double norm = weight_normalizer(sample_weights, batch, reduction);

  SoftmaxRows sm = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const auto a = static_cast<std::size_t>(labels_a[n]);
    const auto b = static_cast<std::size_t>(labels_b[n]);
    const double ce_a = sm.log_norm[n] - z.at(n, a);
    const double ce_b = sm.log_norm[n] - z.at(n, b);
    loss += sample_weights[n] * ((1.0 - lambdas[n]) * ce_a + lambdas[n] * ce_b);
  }
  loss /= norm;

  std::vector<int> ya(labels_a.begin(), labels_a.end());
  std::vector<int> yb(labels_b.begin(), labels_b.end());
  std::vector<double> ls(lambdas.begin(), lambdas.end());
  std::vector<double> ws(sample_weights.begin(), sample_weights.end());
  const std::size_t li = logits.index;
  return tape.record(Tensor::scalar(loss),
                     [li, norm, probs = std::move(sm.probs), ya = std::move(ya),
                      yb = std::move(yb), ls = std::move(ls),
                      ws = std::move(ws)](Tape& t, std::size_t self) {
                       const double g = t.adjoint(self)[0];
                       Tensor& dz = t.adjoint(li);
                       const std::size_t classes = probs.cols();
                       for (std::size_t n = 0; n < ya.size(); ++n) {
                         const double scale_n = g * ws[n] / norm;
                         for (std::size_t c = 0; c < classes; ++c) {
                           double target = 0.0;
                           if (static_cast<std::size_t>(ya[n]) == c) target += 1.0 - ls[n];
                           if (static_cast<std::size_t>(yb[n]) == c) target += ls[n];
                           dz[n * classes + c] += scale_n * (probs.at(n, c) - target);
                         }
                       }
                     });
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta,
                        double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
  Tensor grad(theta.shape());
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace mfw::ad
