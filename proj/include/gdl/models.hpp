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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gdl/ops.hpp"

namespace gdl {

enum class LayerKind {
  kConv,
  kConvTranspose,
  kBatchNorm,
  kActivation,
  kDense,
  kPool,
  kResidualBlock,
  kFireModule,
  kInceptionBlock,
  kFlatten,
};

enum class PoolKind { kMax, kGlobalAvg };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  std::string name;  // parameter prefix
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  bool bias = false;
  ops::Activation activation = ops::Activation::kRelu;
  double alpha = 0.2;
  PoolKind pool = PoolKind::kMax;
  // fire: {squeeze, expand1x1, expand3x3}
  // inception: {1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool projection}
  std::vector<int> widths{};
};

enum class ModelKind { kGenerator, kDiscriminator, kAlexNetMini, kSqueezeNetMini, kGoogLeNetMini, kResNet18Mini };

const char* model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);
bool is_backbone(ModelKind kind);

struct ModelMetadata {
  ModelKind kind = ModelKind::kGenerator;
  Shape input_shape;  // per sample
  int output_arity = 0;
  int image_size = 0;
  int latent_dim = 0;
  int base_channels = 0;
  int num_classes = 0;
  DType dtype = DType::kF32;
};

// Insertion-ordered named tensors.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Deep copy; gradients are dropped.
  ParameterSet clone() const;
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct ModelOptions {
  int image_size = 64;
  int latent_dim = 100;
  int base_channels = 32;
  int num_classes = 2;
  DType dtype = DType::kF32;
  std::uint64_t seed = 0;
};

class ModelGraph {
 public:
  ModelGraph(ModelMetadata metadata, std::vector<LayerSpec> layers, ParameterSet params, ParameterSet buffers);

  const ModelMetadata& metadata() const { return metadata_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  // Batch-norm running statistics; persisted but never trained.
  ParameterSet& buffers() { return buffers_; }
  const ParameterSet& buffers() const { return buffers_; }

  // Train mode updates batch-norm running statistics in place.
  Tensor forward(Tape& tape, const Tensor& input, ops::Mode mode);

  bool has_head() const;
  bool trained() const { return trained_; }
  void set_trained(bool value) { trained_ = value; }

  std::vector<Tensor> trainable_parameters() const;
  void clear_grads();
  std::int64_t parameter_count() const;
  // Covers parameters and buffers, in insertion order.
  std::uint64_t checksum() const;
  // Covers every parameter outside the fine-tune head.
  std::uint64_t backbone_checksum() const;

  ModelGraph clone() const;

 private:
  Tensor apply(Tape& tape, const LayerSpec& layer, const Tensor& x, ops::Mode mode);
  Tensor conv(Tape& tape, const std::string& prefix, const Tensor& x, int stride, int padding, bool bias);
  Tensor bn(Tape& tape, const std::string& prefix, const Tensor& x, ops::Mode mode);

  ModelMetadata metadata_;
  std::vector<LayerSpec> layers_;
  ParameterSet params_;
  ParameterSet buffers_;
  bool trained_ = false;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr const char* kHeadPrefix = "head.";

// Transposed-conv ladder from a (latent, 1, 1) code to a 1-channel image in [-1, 1].
// image_size 64 yields 5 tconv / 4 batchnorm / 4 relu / 1 tanh.
ModelGraph build_generator(const ModelOptions& options);

// Strided-conv ladder from a 1-channel image to one probability per sample.
// image_size 64 yields 5 conv / 3 batchnorm / 4 leaky_relu.
ModelGraph build_discriminator(const ModelOptions& options);

ModelGraph build_backbone(ModelKind kind, const ModelOptions& options);

// Rebuilds the architecture described by `metadata` with fresh weights.
ModelGraph build_model(const ModelMetadata& metadata, std::uint64_t seed = 0);

// Frozen: only head parameters require gradients.
void freeze_backbone(ModelGraph& model, bool frozen);

struct LayerCensus {
  int conv = 0;
  int conv_transpose = 0;
  int batchnorm = 0;
  int relu = 0;
  int leaky_relu = 0;
  int tanh = 0;
  int sigmoid = 0;
  bool all_conv_kernels_4x4 = true;
};

LayerCensus audit_layers(const ModelGraph& model);

// Forward of a (N, latent) noise batch.
Tensor generate(ModelGraph& generator, Tape& tape, const Tensor& noise, ops::Mode mode);

}  // namespace gdl
