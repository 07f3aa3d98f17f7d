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

// Serial vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "mfwlab/kernels.hpp"
#include "mfwlab/rng.hpp"

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  mfw::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = mfw::normal(rng);
  return v;
}

template <auto Gemm>
void bm_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(a, b, c, mfw::kernels::GemmDims{n, n, n}, mfw::kernels::Accumulate::kOverwrite);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <auto Distances>
void bm_subset_distances(benchmark::State& state) {
  const std::size_t rows = 2000, dim = 32, k = 20;
  const auto rounds = static_cast<std::size_t>(state.range(0));
  const auto features = random_vector(rows * dim, 3);
  const auto target = random_vector(dim, 4);
  mfw::Rng rng(5);
  std::vector<std::size_t> subsets;
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto s = mfw::sample_without_replacement(rng, rows, k);
    subsets.insert(subsets.end(), s.begin(), s.end());
  }
  for (auto _ : state) {
    auto d = Distances(features, dim, subsets, k, target);
    benchmark::DoNotOptimize(d.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rounds));
}

}  // namespace

BENCHMARK(bm_gemm_nn<mfw::kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_gemm_nn<mfw::kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_subset_distances<mfw::kernels::serial::subset_mean_distances>)
    ->Name("subset_mean_distances/serial")->Arg(1000)->Arg(10000);
BENCHMARK(bm_subset_distances<mfw::kernels::omp::subset_mean_distances>)
    ->Name("subset_mean_distances/omp")->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
