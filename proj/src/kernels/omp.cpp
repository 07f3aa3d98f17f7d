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
#include <cstdint>

#include "mfwlab/kernels.hpp"

// Same per-element loop order as serial.cpp; only the outer row loop is split.

namespace mfw::kernels::omp {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < m; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = c.data() + i * d.n;
    if (mode == Accumulate::kOverwrite) std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = a[i * d.k + p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < m; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = c.data() + i * d.n;
    if (mode == Accumulate::kOverwrite) std::fill(ci, ci + d.n, 0.0);
    for (std::size_t p = 0; p < d.k; ++p) {
      const double api = a[p * d.m + i];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += api * bp[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < m; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const auto n = static_cast<std::int64_t>(rounds);
#pragma omp parallel
  {
    std::vector<double> mean(dim);
#pragma omp for schedule(static)
    for (std::int64_t rr = 0; rr < n; ++rr) {
      const auto r = static_cast<std::size_t>(rr);
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
  }
  return out;
}

}  // namespace mfw::kernels::omp

namespace mfw::kernels {

namespace {
bool large(GemmDims d) { return d.m * d.k * d.n >= kParallelThreshold && d.m > 1; }
}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  large(d) ? omp::gemm_nn(a, b, c, d, mode) : serial::gemm_nn(a, b, c, d, mode);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  large(d) ? omp::gemm_tn(a, b, c, d, mode) : serial::gemm_tn(a, b, c, d, mode);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims d, Accumulate mode) {
  large(d) ? omp::gemm_nt(a, b, c, d, mode) : serial::gemm_nt(a, b, c, d, mode);
}

std::vector<double> subset_mean_distances(std::span<const double> features, std::size_t dim,
                                          std::span<const std::size_t> subsets, std::size_t k,
                                          std::span<const double> target) {
  const std::size_t work = subsets.size() * dim;
  return work >= kParallelThreshold
             ? omp::subset_mean_distances(features, dim, subsets, k, target)
             : serial::subset_mean_distances(features, dim, subsets, k, target);
}

}  // namespace mfw::kernels
