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

#ifndef MFWLAB_RNG_HPP
#define MFWLAB_RNG_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace mfw {

/// Deterministic pseudo-random generator.
///
/// Algorithm: xoshiro256** (Blackman & Vigna). The 256-bit state is filled
/// from the 64-bit seed with four successive splitmix64 outputs, so every
/// seed (including 0) gives a non-degenerate state. Streams depend only on
/// the seed and are identical on every platform.
///
/// Single owner: move it between threads, never share it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Next raw 64-bit output; advances the state by one step.
  std::uint64_t next_u64() noexcept;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// One splitmix64 step applied to `x`; used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of an independent sub-stream, a pure function of (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

Rng seeded_rng(std::uint64_t seed);

/// Uniform double in [0, 1) with 53 random bits; one state step.
double uniform(Rng& rng) noexcept;

/// Unbiased integer in [0, n) by rejection; n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Standard normal by Box-Muller; two uniforms per call, no caching.
double normal(Rng& rng) noexcept;

/// Gamma(shape, 1) via Marsaglia-Tsang, returned as its natural log so that
/// tiny draws for shape < 1 do not underflow.
double log_gamma_sample(Rng& rng, double shape);

/// One draw from Beta(alpha, alpha). Throws InvalidArgument if alpha <= 0.
double beta_sample(Rng& rng, double alpha);

/// Uniform random permutation of 0..n-1 (Fisher-Yates). Throws on n == 0.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

/// k distinct indices drawn uniformly from 0..n-1, in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

}  // namespace mfw

#endif  // MFWLAB_RNG_HPP
