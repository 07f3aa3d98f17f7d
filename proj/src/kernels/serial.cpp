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

#include <algorithm>
#include <cmath>

#include "mfwlab/kernels.hpp"

namespace mfw::kernels::serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  if (mode == Accumulate::kOverwrite) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  if (mode == Accumulate::kOverwrite) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < d.m; ++i) {
    double* ci = c.data() + i * d.n;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double api = a[p * d.m + i];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += api * bp[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  for (std::size_t i = 0; i < d.m; ++i) {
    const double* ai = a.data() + i * d.k;
    for (std::size_t j = 0; j < d.n; ++j) {
      const double* bj = b.data() + j * d.k;
      double acc = mode == Accumulate::kAdd ? c[i * d.n + j] : 0.0;
      for (std::size_t p = 0; p < d.k; ++p) acc += ai[p] * bj[p];
      c[i * d.n + j] = acc;
    }
  }
}

std::vector<double> subset_mean_distances(std::span<const double> features, std::size_t dim,
                                          std::span<const std::size_t> subsets, std::size_t k,
                                          std::span<const double> target) {
  const std::size_t rounds = k == 0 ? 0 : subsets.size() / k;
  std::vector<double> out(rounds);
  std::vector<double> mean(dim);
  for (std::size_t r = 0; r < rounds; ++r) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t s = 0; s < k; ++s) {
      const double* row = features.data() + subsets[r * k + s] * dim;
      for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = mean[j] / static_cast<double>(k) - target[j];
      sq += diff * diff;
    }
    out[r] = std::sqrt(sq);
  }
  return out;
}

}  // namespace mfw::kernels::serial
