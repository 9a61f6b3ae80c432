// Copyright 2026 The gdl Authors. All Rights Reserved.
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

#include "gdl/models.hpp"

#include <algorithm>
#include <bit>
#include <random>

#include "gdl/checksum.hpp"
#include "gdl/error.hpp"

namespace gdl {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kConvTranspose: return "conv_transpose";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kDense: return "dense";
    case LayerKind::kPool: return "pool";
    case LayerKind::kResidualBlock: return "residual_block";
    case LayerKind::kFireModule: return "fire_module";
    case LayerKind::kInceptionBlock: return "inception_block";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGenerator: return "generator";
    case ModelKind::kDiscriminator: return "discriminator";
    case ModelKind::kAlexNetMini: return "alexnet_mini";
    case ModelKind::kSqueezeNetMini: return "squeezenet_mini";
    case ModelKind::kGoogLeNetMini: return "googlenet_mini";
    case ModelKind::kResNet18Mini: return "resnet18_mini";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::kGenerator, ModelKind::kDiscriminator, ModelKind::kAlexNetMini,
                    ModelKind::kSqueezeNetMini, ModelKind::kGoogLeNetMini, ModelKind::kResNet18Mini}) {
    if (name == model_kind_name(kind)) return kind;
  }
  return std::nullopt;
}

bool is_backbone(ModelKind kind) { return kind != ModelKind::kGenerator && kind != ModelKind::kDiscriminator; }

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) fail(ErrorCode::kConfigError, "duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

Tensor& ParameterSet::at(std::string_view name) {
  for (auto& [key, value] : entries_) {
    if (key == name) return value;
  }
  fail(ErrorCode::kConfigError, "unknown parameter " + std::string(name));
}

const Tensor& ParameterSet::at(std::string_view name) const { return const_cast<ParameterSet*>(this)->at(name); }

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [name, value] : entries_) {
    auto copy = value.clone();
    copy.clear_grad();
    out.add(name, copy);
  }
  return out;
}

std::uint64_t ParameterSet::checksum() const {
  Fnv1a h;
  for (const auto& [name, value] : entries_) {
    h.update(name);
    for (double v : value.data()) {
      if (value.dtype() == DType::kF32) {
        h.update_float(static_cast<float>(v));
      } else {
        h.update_double(v);
      }
    }
  }
  return h.digest();
}

ModelGraph::ModelGraph(ModelMetadata metadata, std::vector<LayerSpec> layers, ParameterSet params, ParameterSet buffers)
    : metadata_(std::move(metadata)), layers_(std::move(layers)), params_(std::move(params)), buffers_(std::move(buffers)) {}

bool ModelGraph::has_head() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const LayerSpec& l) { return l.kind == LayerKind::kDense && l.name == "head"; });
}

std::vector<Tensor> ModelGraph::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, value] : params_) {
    if (value.requires_grad()) out.push_back(value);
  }
  return out;
}

void ModelGraph::clear_grads() {
  for (auto& [name, value] : params_) value.clear_grad();
}

std::int64_t ModelGraph::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, value] : params_) n += value.numel();
  return n;
}

std::uint64_t ModelGraph::checksum() const {
  Fnv1a h;
  h.update(hex64(params_.checksum()));
  h.update(hex64(buffers_.checksum()));
  return h.digest();
}

std::uint64_t ModelGraph::backbone_checksum() const {
  ParameterSet backbone;
  for (const auto& [name, value] : params_) {
    if (!name.starts_with(kHeadPrefix)) backbone.add(name, value);
  }
  return backbone.checksum();
}

ModelGraph ModelGraph::clone() const {
  ModelGraph copy(metadata_, layers_, params_.clone(), buffers_.clone());
  for (auto& [name, value] : copy.params_) value.set_requires_grad(params_.at(name).requires_grad());
  copy.trained_ = trained_;
  return copy;
}

Tensor ModelGraph::conv(Tape& tape, const std::string& prefix, const Tensor& x, int stride, int padding, bool bias) {
  const Tensor b = bias ? params_.at(prefix + ".bias") : Tensor{};
  return ops::conv2d(tape, x, params_.at(prefix + ".weight"), b, stride, padding);
}

Tensor ModelGraph::bn(Tape& tape, const std::string& prefix, const Tensor& x, ops::Mode mode) {
  ops::RunningStats stats{buffers_.at(prefix + ".running_mean"), buffers_.at(prefix + ".running_var")};
  return ops::batchnorm2d(tape, x, params_.at(prefix + ".gamma"), params_.at(prefix + ".beta"), kBatchNormEps, mode,
                          stats);
}

Tensor ModelGraph::apply(Tape& tape, const LayerSpec& layer, const Tensor& x, ops::Mode mode) {
  const std::string& p = layer.name;
  switch (layer.kind) {
    case LayerKind::kConv:
      return conv(tape, p, x, layer.stride, layer.padding, layer.bias);
    case LayerKind::kConvTranspose: {
      const Tensor b = layer.bias ? params_.at(p + ".bias") : Tensor{};
      return ops::conv_transpose2d(tape, x, params_.at(p + ".weight"), b, layer.stride, layer.padding);
    }
    case LayerKind::kBatchNorm:
      return bn(tape, p, x, mode);
    case LayerKind::kActivation:
      return ops::activation(tape, layer.activation, x, layer.alpha);
    case LayerKind::kDense:
      return ops::linear(tape, x, params_.at(p + ".weight"), layer.bias ? params_.at(p + ".bias") : Tensor{});
    case LayerKind::kPool:
      if (layer.pool == PoolKind::kGlobalAvg) return ops::global_avg_pool(tape, x);
      return ops::max_pool2d(tape, x, layer.kernel, layer.stride, layer.padding);
    case LayerKind::kFlatten:
      return ops::flatten(tape, x);
    case LayerKind::kResidualBlock: {
      // Pre-activation: x + conv2(relu(bn2(conv1(relu(bn1(x)))))).
      auto h = ops::relu(tape, bn(tape, p + ".bn1", x, mode));
      h = conv(tape, p + ".conv1", h, 1, 1, false);
      h = ops::relu(tape, bn(tape, p + ".bn2", h, mode));
      h = conv(tape, p + ".conv2", h, 1, 1, false);
      return ops::add(tape, x, h);
    }
    case LayerKind::kFireModule: {
      auto s = ops::relu(tape, conv(tape, p + ".squeeze", x, 1, 0, true));
      std::vector<Tensor> parts{ops::relu(tape, conv(tape, p + ".expand1x1", s, 1, 0, true)),
                                ops::relu(tape, conv(tape, p + ".expand3x3", s, 1, 1, true))};
      return ops::concat_channels(tape, parts);
    }
    case LayerKind::kInceptionBlock: {
      auto b1 = ops::relu(tape, conv(tape, p + ".b1x1", x, 1, 0, true));
      auto b3 = ops::relu(tape, conv(tape, p + ".b3x3_reduce", x, 1, 0, true));
      b3 = ops::relu(tape, conv(tape, p + ".b3x3", b3, 1, 1, true));
      auto b5 = ops::relu(tape, conv(tape, p + ".b5x5_reduce", x, 1, 0, true));
      b5 = ops::relu(tape, conv(tape, p + ".b5x5", b5, 1, 2, true));
      auto bp = ops::max_pool2d(tape, x, 3, 1, 1);
      bp = ops::relu(tape, conv(tape, p + ".pool_proj", bp, 1, 0, true));
      std::vector<Tensor> parts{b1, b3, b5, bp};
      return ops::concat_channels(tape, parts);
    }
  }
  fail(ErrorCode::kConfigError, "unknown layer kind");
}

Tensor ModelGraph::forward(Tape& tape, const Tensor& input, ops::Mode mode) {
  Shape expected = metadata_.input_shape;
  Tensor x = input;
  if (metadata_.kind == ModelKind::kGenerator && input.rank() == 2) {
    x = ops::reshape(tape, input, {input.dim(0), input.dim(1), 1, 1});
  }
  if (x.rank() != 4 || !std::equal(expected.begin(), expected.end(), x.shape().begin() + 1)) {
    fail(ErrorCode::kShapeMismatch, std::string(model_kind_name(metadata_.kind)) + " expects samples of shape " +
                                        shape_str(expected) + ", got batch " + shape_str(input.shape()));
  }
  for (const auto& layer : layers_) x = apply(tape, layer, x, mode);
  if (metadata_.kind == ModelKind::kDiscriminator) x = ops::reshape(tape, x, {x.dim(0)});
  return x;
}

namespace {

class Builder {
 public:
  Builder(ModelMetadata metadata, std::uint64_t seed) : metadata_(std::move(metadata)), rng_(seed) {}

  std::string next_name() { return "l" + std::to_string(layers_.size()); }

  void conv(int in, int out, int kernel, int stride, int padding, bool bias) {
    LayerSpec l{.kind = LayerKind::kConv, .name = next_name(), .in_channels = in, .out_channels = out, .kernel = kernel, .stride = stride, .padding = padding, .bias = bias};
    conv_params(l.name, {out, in, kernel, kernel}, bias ? out : 0);
    layers_.push_back(l);
  }

  void conv_transpose(int in, int out, int kernel, int stride, int padding, bool bias) {
    LayerSpec l{.kind = LayerKind::kConvTranspose, .name = next_name(), .in_channels = in, .out_channels = out, .kernel = kernel, .stride = stride, .padding = padding, .bias = bias};
    conv_params(l.name, {in, out, kernel, kernel}, bias ? out : 0);
    layers_.push_back(l);
  }

  void batchnorm(int channels) {
    LayerSpec l{.kind = LayerKind::kBatchNorm, .name = next_name(), .in_channels = channels, .out_channels = channels};
    bn_params(l.name, channels);
    layers_.push_back(l);
  }

  void activation(ops::Activation kind, double alpha = 0.2) {
    LayerSpec l{.kind = LayerKind::kActivation, .name = next_name()};
    l.activation = kind;
    l.alpha = alpha;
    layers_.push_back(l);
  }

  void max_pool(int kernel, int stride) {
    LayerSpec l{.kind = LayerKind::kPool, .name = next_name()};
    l.kernel = kernel;
    l.stride = stride;
    layers_.push_back(l);
  }

  void global_avg_pool() {
    LayerSpec l{.kind = LayerKind::kPool, .name = next_name()};
    l.pool = PoolKind::kGlobalAvg;
    layers_.push_back(l);
  }

  void flatten() { layers_.push_back(LayerSpec{.kind = LayerKind::kFlatten, .name = next_name()}); }

  void dense(int in, int out, bool bias, std::string name = {}) {
    LayerSpec l{.kind = LayerKind::kDense, .name = name.empty() ? next_name() : std::move(name), .in_channels = in, .out_channels = out};
    l.bias = bias;
    params_.add(l.name + ".weight", gaussian({in, out}, 0.0, 0.02));
    if (bias) params_.add(l.name + ".bias", Tensor::zeros({out}, metadata_.dtype));
    layers_.push_back(l);
  }

  void residual_block(int channels) {
    LayerSpec l{.kind = LayerKind::kResidualBlock, .name = next_name(), .in_channels = channels, .out_channels = channels, .kernel = 3, .stride = 1, .padding = 1};
    bn_params(l.name + ".bn1", channels);
    conv_params(l.name + ".conv1", {channels, channels, 3, 3}, 0);
    bn_params(l.name + ".bn2", channels);
    conv_params(l.name + ".conv2", {channels, channels, 3, 3}, 0);
    layers_.push_back(l);
  }

  void fire_module(int in, int squeeze, int expand1, int expand3) {
    LayerSpec l{.kind = LayerKind::kFireModule, .name = next_name(), .in_channels = in, .out_channels = expand1 + expand3};
    l.widths = {squeeze, expand1, expand3};
    conv_params(l.name + ".squeeze", {squeeze, in, 1, 1}, squeeze);
    conv_params(l.name + ".expand1x1", {expand1, squeeze, 1, 1}, expand1);
    conv_params(l.name + ".expand3x3", {expand3, squeeze, 3, 3}, expand3);
    layers_.push_back(l);
  }

  void inception_block(int in, int b1, int b3r, int b3, int b5r, int b5, int pool) {
    LayerSpec l{.kind = LayerKind::kInceptionBlock, .name = next_name(), .in_channels = in, .out_channels = b1 + b3 + b5 + pool};
    l.widths = {b1, b3r, b3, b5r, b5, pool};
    conv_params(l.name + ".b1x1", {b1, in, 1, 1}, b1);
    conv_params(l.name + ".b3x3_reduce", {b3r, in, 1, 1}, b3r);
    conv_params(l.name + ".b3x3", {b3, b3r, 3, 3}, b3);
    conv_params(l.name + ".b5x5_reduce", {b5r, in, 1, 1}, b5r);
    conv_params(l.name + ".b5x5", {b5, b5r, 5, 5}, b5);
    conv_params(l.name + ".pool_proj", {pool, in, 1, 1}, pool);
    layers_.push_back(l);
  }

  ModelGraph finish() {
    for (auto& [name, value] : params_) value.set_requires_grad(true);
    return ModelGraph(metadata_, std::move(layers_), std::move(params_), std::move(buffers_));
  }

 private:
  Tensor gaussian(Shape shape, double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = dist(rng_);
    return Tensor::from(std::move(shape), std::move(v), metadata_.dtype);
  }

  void conv_params(const std::string& prefix, Shape weight, int bias) {
    params_.add(prefix + ".weight", gaussian(std::move(weight), 0.0, 0.02));
    if (bias > 0) params_.add(prefix + ".bias", Tensor::zeros({bias}, metadata_.dtype));
  }

  void bn_params(const std::string& prefix, int channels) {
    params_.add(prefix + ".gamma", gaussian({channels}, 1.0, 0.02));
    params_.add(prefix + ".beta", Tensor::zeros({channels}, metadata_.dtype));
    buffers_.add(prefix + ".running_mean", Tensor::zeros({channels}, metadata_.dtype));
    buffers_.add(prefix + ".running_var", Tensor::full({channels}, 1.0, metadata_.dtype));
  }

  ModelMetadata metadata_;
  std::mt19937_64 rng_;
  std::vector<LayerSpec> layers_;
  ParameterSet params_;
  ParameterSet buffers_;
};

int upsampling_stages(int image_size, const char* what) {
  if (image_size != 8 && image_size != 16 && image_size != 32 && image_size != 64) {
    fail(ErrorCode::kInvalidHyperparameter,
         std::string(what) + ": image size must be one of 8, 16, 32, 64; got " + std::to_string(image_size));
  }
  return std::countr_zero(static_cast<unsigned>(image_size / 4));
}

}  // namespace

ModelGraph build_generator(const ModelOptions& options) {
  const int stages = upsampling_stages(options.image_size, "generator");
  if (options.latent_dim < 1) fail(ErrorCode::kInvalidHyperparameter, "generator: latent_dim must be >= 1");
  if (options.base_channels < 1) fail(ErrorCode::kInvalidHyperparameter, "generator: base_channels must be >= 1");

  ModelMetadata meta;
  meta.kind = ModelKind::kGenerator;
  meta.input_shape = {options.latent_dim, 1, 1};
  meta.output_arity = options.image_size * options.image_size;
  meta.image_size = options.image_size;
  meta.latent_dim = options.latent_dim;
  meta.base_channels = options.base_channels;
  meta.dtype = options.dtype;

  Builder b(meta, options.seed);
  int channels = options.base_channels << (stages - 1);
  b.conv_transpose(options.latent_dim, channels, 4, 1, 0, false);  // 1x1 -> 4x4
  b.batchnorm(channels);
  b.activation(ops::Activation::kRelu);
  for (int s = 1; s < stages; ++s) {
    b.conv_transpose(channels, channels / 2, 4, 2, 1, false);
    channels /= 2;
    b.batchnorm(channels);
    b.activation(ops::Activation::kRelu);
  }
  b.conv_transpose(channels, 1, 4, 2, 1, false);
  b.activation(ops::Activation::kTanh);
  return b.finish();
}

ModelGraph build_discriminator(const ModelOptions& options) {
  const int stages = upsampling_stages(options.image_size, "discriminator");
  if (options.base_channels < 1) fail(ErrorCode::kInvalidHyperparameter, "discriminator: base_channels must be >= 1");

  ModelMetadata meta;
  meta.kind = ModelKind::kDiscriminator;
  meta.input_shape = {1, options.image_size, options.image_size};
  meta.output_arity = 1;
  meta.image_size = options.image_size;
  meta.base_channels = options.base_channels;
  meta.dtype = options.dtype;

  Builder b(meta, options.seed);
  int channels = options.base_channels;
  b.conv(1, channels, 4, 2, 1, false);
  b.activation(ops::Activation::kLeakyRelu, 0.2);
  for (int s = 1; s < stages; ++s) {
    b.conv(channels, channels * 2, 4, 2, 1, false);
    channels *= 2;
    b.batchnorm(channels);
    b.activation(ops::Activation::kLeakyRelu, 0.2);
  }
  b.conv(channels, 1, 4, 1, 0, false);  // 4x4 -> 1x1
  b.activation(ops::Activation::kSigmoid);
  return b.finish();
}

ModelGraph build_backbone(ModelKind kind, const ModelOptions& options) {
  if (!is_backbone(kind)) fail(ErrorCode::kInvalidHyperparameter, "not a backbone kind");
  const int size = options.image_size;
  if (size != 16 && size != 32 && size != 64) {
    fail(ErrorCode::kInvalidHyperparameter, "backbone input size must be 16, 32 or 64; got " + std::to_string(size));
  }
  const int w = options.base_channels;
  if (w < 4 || w % 4 != 0) fail(ErrorCode::kInvalidHyperparameter, "backbone width must be a positive multiple of 4");
  if (options.num_classes < 2) fail(ErrorCode::kInvalidHyperparameter, "num_classes must be >= 2");

  ModelMetadata meta;
  meta.kind = kind;
  meta.input_shape = {1, size, size};
  meta.output_arity = options.num_classes;
  meta.image_size = size;
  meta.base_channels = w;
  meta.num_classes = options.num_classes;
  meta.dtype = options.dtype;

  Builder b(meta, options.seed);
  int features = 0;
  switch (kind) {
    case ModelKind::kAlexNetMini: {
      b.conv(1, w, 5, 1, 2, true);
      b.activation(ops::Activation::kRelu);
      b.max_pool(2, 2);
      b.conv(w, 2 * w, 3, 1, 1, true);
      b.activation(ops::Activation::kRelu);
      b.max_pool(2, 2);
      b.conv(2 * w, 2 * w, 3, 1, 1, true);
      b.activation(ops::Activation::kRelu);
      b.max_pool(2, 2);
      b.flatten();
      const int side = size / 8;
      b.dense(2 * w * side * side, 4 * w, true);
      b.activation(ops::Activation::kRelu);
      features = 4 * w;
      break;
    }
    case ModelKind::kSqueezeNetMini:
      b.conv(1, w, 3, 1, 1, true);
      b.activation(ops::Activation::kRelu);
      b.max_pool(2, 2);
      b.fire_module(w, w / 4, w / 2, w / 2);
      b.fire_module(w, w / 4, w, w);
      b.max_pool(2, 2);
      b.fire_module(2 * w, w / 2, w, w);
      b.global_avg_pool();
      features = 2 * w;
      break;
    case ModelKind::kGoogLeNetMini:
      b.conv(1, w, 3, 1, 1, true);
      b.activation(ops::Activation::kRelu);
      b.max_pool(2, 2);
      b.inception_block(w, w / 2, w / 2, w, w / 4, w / 4, w / 4);
      b.max_pool(2, 2);
      b.inception_block(2 * w, w, w / 2, w, w / 4, w / 2, w / 2);
      b.global_avg_pool();
      features = 3 * w;
      break;
    case ModelKind::kResNet18Mini:
      b.conv(1, w, 3, 1, 1, false);
      b.residual_block(w);
      b.residual_block(w);
      b.conv(w, 2 * w, 3, 2, 1, false);
      b.residual_block(2 * w);
      b.residual_block(2 * w);
      b.batchnorm(2 * w);
      b.activation(ops::Activation::kRelu);
      b.global_avg_pool();
      features = 2 * w;
      break;
    default:
      break;
  }
  b.dense(features, options.num_classes, true, "head");
  return b.finish();
}

ModelGraph build_model(const ModelMetadata& metadata, std::uint64_t seed) {
  ModelOptions options;
  options.image_size = metadata.image_size;
  options.latent_dim = metadata.latent_dim;
  options.base_channels = metadata.base_channels;
  options.num_classes = metadata.num_classes;
  options.dtype = metadata.dtype;
  options.seed = seed;
  switch (metadata.kind) {
    case ModelKind::kGenerator: return build_generator(options);
    case ModelKind::kDiscriminator: return build_discriminator(options);
    default: return build_backbone(metadata.kind, options);
  }
}

void freeze_backbone(ModelGraph& model, bool frozen) {
  if (!model.has_head()) fail(ErrorCode::kNoHead, std::string(model_kind_name(model.metadata().kind)) + " has no fine-tune head");
  for (auto& [name, value] : model.parameters()) {
    if (!name.starts_with(kHeadPrefix)) {
      value.set_requires_grad(!frozen);
      if (frozen) value.clear_grad();
    }
  }
}

LayerCensus audit_layers(const ModelGraph& model) {
  LayerCensus c;
  for (const auto& l : model.layers()) {
    switch (l.kind) {
      case LayerKind::kConv:
        ++c.conv;
        c.all_conv_kernels_4x4 = c.all_conv_kernels_4x4 && l.kernel == 4;
        break;
      case LayerKind::kConvTranspose:
        ++c.conv_transpose;
        c.all_conv_kernels_4x4 = c.all_conv_kernels_4x4 && l.kernel == 4;
        break;
      case LayerKind::kBatchNorm: ++c.batchnorm; break;
      case LayerKind::kActivation:
        switch (l.activation) {
          case ops::Activation::kRelu: ++c.relu; break;
          case ops::Activation::kLeakyRelu: ++c.leaky_relu; break;
          case ops::Activation::kTanh: ++c.tanh; break;
          case ops::Activation::kSigmoid: ++c.sigmoid; break;
        }
        break;
      default: break;
    }
  }
  return c;
}

Tensor generate(ModelGraph& generator, Tape& tape, const Tensor& noise, ops::Mode mode) {
  if (generator.metadata().kind != ModelKind::kGenerator) {
    fail(ErrorCode::kConfigError, "generate() needs a generator model");
  }
  return generator.forward(tape, noise, mode);
}

}  // namespace gdl
