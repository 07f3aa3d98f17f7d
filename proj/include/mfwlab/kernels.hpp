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

#ifndef MFWLAB_KERNELS_HPP
#define MFWLAB_KERNELS_HPP

#include <cstddef>
#include <span>
#include <vector>

// Dense kernels used by the autodiff tape and the metrics.
//
// Each kernel exists twice: `serial` is the reference, `omp` splits the
// outermost output loop across OpenMP threads. Both evaluate every output
// element with the same summation order, so their results are bitwise equal
// for any thread count. The unqualified entry points pick `omp` above a
// work threshold and `serial` below it.

namespace mfw::kernels {

enum class Accumulate { kOverwrite, kAdd };

struct GemmDims {
  std::size_t m;  // rows of the result
  std::size_t k;  // contraction length
  std::size_t n;  // columns of the result
};

namespace serial {

/// C[m,n] (=|+=) A[m,k] * B[k,n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);
/// C[m,n] (=|+=) A[k,m]^T * B[k,n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);
/// C[m,n] (=|+=) A[m,k] * B[n,k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);

/// For each subset r (row r of `subsets`, `k` indices into the rows of
/// `features`), the Euclidean distance between the subset mean and `target`.
std::vector<double> subset_mean_distances(std::span<const double> features, std::size_t dim,
                                          std::span<const std::size_t> subsets, std::size_t k,
                                          std::span<const double> target);

}  // namespace serial

namespace omp {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode);
std::vector<double> subset_mean_distances(std::span<const double> features, std::size_t dim,
                                          std::span<const std::size_t> subsets, std::size_t k,
                                          std::span<const double> target);

}  // namespace omp

/// Work (m*k*n multiply-adds) below which the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode = Accumulate::kOverwrite);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode = Accumulate::kOverwrite);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             GemmDims dims, Accumulate mode = Accumulate::kOverwrite);
std::vector<double> subset_mean_distances(std::span<const double> features, std::size_t dim,
                                          std::span<const std::size_t> subsets, std::size_t k,
                                          std::span<const double> target);

}  // namespace mfw::kernels

#endif  // MFWLAB_KERNELS_HPP
