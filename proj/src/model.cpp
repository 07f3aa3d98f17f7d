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

#include "mfwlab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfwlab/error.hpp"

namespace mfw {

std::size_t ModelConfig::injection_width() const noexcept {
  return injection_index == 0 ? input_dim : layer_widths[injection_index - 1];
}

std::size_t ModelConfig::feature_dim() const noexcept {
  return layer_widths.empty() ? input_dim : layer_widths.back();
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw InvalidArgument("model: input_dim must be positive");
  for (auto w : layer_widths) {
    if (w == 0) throw InvalidArgument("model: layer widths must be positive");
  }
  if (injection_index > layer_widths.size()) {
    throw InvalidArgument("model: injection_index " + std::to_string(injection_index) +
                          " exceeds hidden layer count " + std::to_string(layer_widths.size()));
  }
  if (num_classes < 2) throw InvalidArgument("model: num_classes must be at least 2");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  std::size_t fan_in = config.input_dim;
  for (auto width : config.layer_widths) {
    p.weights.emplace_back(Shape{fan_in, width});
    if (config.bias) p.biases.emplace_back(Shape{width});
    fan_in = width;
  }
  p.head = Tensor({config.feature_dim(), config.num_classes});
  return p;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    if (!biases.empty()) out.push_back(&biases[i]);
  }
  out.push_back(&head);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back("layer" + std::to_string(i) + ".weight");
    if (!biases.empty()) out.push_back("layer" + std::to_string(i) + ".bias");
  }
  out.push_back("head.weight");
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = ModelParams::zeros(config);
  for (auto& w : p.weights) {
    const double sd = std::sqrt(2.0 / static_cast<double>(w.shape()[0]));
    for (auto& v : w.data()) v = sd * normal(rng);
  }
  const double head_sd = std::sqrt(1.0 / static_cast<double>(p.head.shape()[0]));
  for (auto& v : p.head.data()) v = head_sd * normal(rng);
  return p;
}

ModelGraph::ModelGraph(ad::Tape& tape, const ModelParams& params)
    : tape_(tape), params_(params) {
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    weights_.push_back(tape.leaf(params.weights[i]));
    if (!params.biases.empty()) biases_.push_back(tape.leaf(params.biases[i]));
  }
  head_ = tape.leaf(params.head);
}

ad::Var ModelGraph::input(const Tensor& x) {
  require_matrix(x, params_.config.input_dim, "model input");
  return tape_.leaf(x);
}

ad::Var ModelGraph::layer(std::size_t i, ad::Var x) {
  ad::Var y = biases_.empty() ? ad::matmul(tape_, x, weights_[i])
                              : ad::affine(tape_, x, weights_[i], biases_[i]);
  if (i + 1 < weights_.size()) y = ad::relu(tape_, y);
  return y;
}

ad::Var ModelGraph::features_g(ad::Var x) {
  require_matrix(tape_.value(x), params_.config.input_dim, "features_g");
  for (std::size_t i = 0; i < params_.config.injection_index; ++i) x = layer(i, x);
  return x;
}

ad::Var ModelGraph::head_h(ad::Var z) {
  require_matrix(tape_.value(z), params_.config.injection_width(), "head_h");
  for (std::size_t i = params_.config.injection_index; i < weights_.size(); ++i) z = layer(i, z);
  return z;
}

ad::Var ModelGraph::logits(ad::Var f) {
  require_matrix(tape_.value(f), params_.config.feature_dim(), "logits");
  return ad::matmul(tape_, f, head_);
}

ModelParams ModelGraph::param_grads() const {
  ModelParams g = ModelParams::zeros(params_.config);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    g.weights[i] = tape_.grad(weights_[i]);
    if (!biases_.empty()) g.biases[i] = tape_.grad(biases_[i]);
  }
  g.head = tape_.grad(head_);
  return g;
}

Tensor extract_features(const ModelParams& params, const Tensor& x) {
  ad::Tape tape;
  ModelGraph graph(tape, params);
  return tape.value(graph.head_h(graph.features_g(graph.input(x))));
}

Tensor extract_intermediate(const ModelParams& params, const Tensor& x) {
  ad::Tape tape;
  ModelGraph graph(tape, params);
  return tape.value(graph.features_g(graph.input(x)));
}

Tensor compute_logits(const ModelParams& params, const Tensor& x) {
  ad::Tape tape;
  ModelGraph graph(tape, params);
  return tape.value(graph.logits(graph.head_h(graph.features_g(graph.input(x)))));
}

std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t n = 0; n < scores.rows(); ++n) {
    const auto row = scores.row(n);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[n] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ModelParams& params, const Tensor& x) {
  return argmax_rows(compute_logits(params, x));
}

namespace {

constexpr const char* kCheckpointFormat = "mfwlab-checkpoint";

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"layer_widths", c.layer_widths},
          {"injection_index", c.injection_index},
          {"num_classes", c.num_classes},
          {"bias", c.bias}};
}

}  // namespace

std::string checkpoint_json(const ModelParams& params) {
  nlohmann::json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = 1;
  doc["config"] = config_to_json(params.config);
  auto names = params.tensor_names();
  auto tensors = params.tensors();
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    list.push_back({{"name", names[i]},
                    {"shape", tensors[i]->shape()},
                    {"data", tensors[i]->storage()}});
  }
  doc["tensors"] = std::move(list);
  return doc.dump(1) + "\n";
}

ModelParams parse_checkpoint(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  if (doc.value("format", "") != kCheckpointFormat) {
    throw FormatError("checkpoint: missing or wrong \"format\" field");
  }
  if (doc.value("version", 0) != 1) throw FormatError("checkpoint: unsupported version");
  try {
    ModelConfig c;
    const auto& jc = doc.at("config");
    c.input_dim = jc.at("input_dim").get<std::size_t>();
    c.layer_widths = jc.at("layer_widths").get<std::vector<std::size_t>>();
    c.injection_index = jc.at("injection_index").get<std::size_t>();
    c.num_classes = jc.at("num_classes").get<std::size_t>();
    c.bias = jc.at("bias").get<bool>();
    ModelParams p = ModelParams::zeros(c);
    auto names = p.tensor_names();
    auto tensors = p.tensors();
    const auto& list = doc.at("tensors");
    if (list.size() != tensors.size()) throw FormatError("checkpoint: wrong tensor count");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& jt = list[i];
      if (jt.at("name").get<std::string>() != names[i]) {
        throw FormatError("checkpoint: expected tensor " + names[i]);
      }
      Tensor t(jt.at("shape").get<Shape>(), jt.at("data").get<std::vector<double>>());
      if (t.shape() != tensors[i]->shape()) {
        throw FormatError("checkpoint: tensor " + names[i] + " has shape " + to_string(t.shape()) +
                          ", expected " + to_string(tensors[i]->shape()));
      }
      *tensors[i] = std::move(t);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_json(params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mfw
