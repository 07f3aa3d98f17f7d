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

#ifndef MFWLAB_MODEL_HPP
#define MFWLAB_MODEL_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mfwlab/autodiff.hpp"
#include "mfwlab/rng.hpp"
#include "mfwlab/tensor.hpp"

namespace mfw {

/// MLP layout. Hidden layer i is affine(+bias) and is followed by ReLU unless
/// it is the last hidden layer; the head is a bias-free linear map to C scores.
/// The first `injection_index` hidden layers form g (where features are
/// mixed), the rest form h. With no hidden layers both g and h are identity.
struct ModelConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> layer_widths;
  std::size_t injection_index = 0;
  std::size_t num_classes = 2;
  bool bias = true;

  std::size_t hidden_layers() const noexcept { return layer_widths.size(); }
  /// Width of g's output (the mixed representation).
  std::size_t injection_width() const noexcept;
  /// Width of f = h(g(x)), the input of the head.
  std::size_t feature_dim() const noexcept;

  /// Throws InvalidArgument describing the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  ModelConfig config;
  std::vector<Tensor> weights;  // hidden layer i: [fan_in, width_i]
  std::vector<Tensor> biases;   // hidden layer i: [width_i]; empty when !config.bias
  Tensor head;                  // [feature_dim, num_classes]

  /// Zero-filled parameters of the given layout.
  static ModelParams zeros(const ModelConfig& config);

  /// Every tensor in a fixed order: per layer weight then bias, head last.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Hidden weights ~ N(0, 2/fan_in), head ~ N(0, 1/feature_dim), biases zero.
/// Draws hidden layers in order, then the head, row-major.
ModelParams init_params(const ModelConfig& config, Rng& rng);

/// Parameters recorded as leaves on a tape, with the forward stages on top.
class ModelGraph {
 public:
  ModelGraph(ad::Tape& tape, const ModelParams& params);

  /// g: layers [0, injection_index). Identity when injection_index == 0.
  ad::Var features_g(ad::Var x);
  /// h: remaining hidden layers. Identity when injection_index == hidden_layers.
  ad::Var head_h(ad::Var z);
  /// Per-class scores f W (no bias).
  ad::Var logits(ad::Var f);

  ad::Var input(const Tensor& x);

  /// Gradients of every parameter after tape.backward(), shaped like params.
  ModelParams param_grads() const;

  const ModelParams& params() const noexcept { return params_; }

 private:
  ad::Var layer(std::size_t i, ad::Var x);

  ad::Tape& tape_;
  const ModelParams& params_;
  std::vector<ad::Var> weights_;
  std::vector<ad::Var> biases_;
  ad::Var head_;
};

/// f(x) = h(g(x)) for a batch, with no mixing.
Tensor extract_features(const ModelParams& params, const Tensor& x);
/// g(x) for a batch.
Tensor extract_intermediate(const ModelParams& params, const Tensor& x);
Tensor compute_logits(const ModelParams& params, const Tensor& x);
/// Row-wise argmax of the logits; ties go to the lowest class index.
std::vector<int> predict(const ModelParams& params, const Tensor& x);
std::vector<int> argmax_rows(const Tensor& scores);

/// JSON checkpoint: {"format": "mfwlab-checkpoint", "version": 1, "config": {...},
/// "tensors": [{"name", "shape", "data"}, ...]} with doubles written in
/// shortest round-trip form, so save/load is exact.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const ModelParams& params);
ModelParams parse_checkpoint(const std::string& text);

}  // namespace mfw

#endif  // MFWLAB_MODEL_HPP
