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

#include <random>

#include "doctest.h"
#include "gdl/error.hpp"
#include "gdl/models.hpp"
#include "grad_check.hpp"

using namespace gdl;

namespace {

Tensor noise(std::int64_t n, std::int64_t latent, unsigned seed, DType dtype = DType::kF32) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(static_cast<std::size_t>(n * latent));
  for (auto& x : v) x = dist(rng);
  return Tensor::from({n, latent}, std::move(v), dtype);
}

void check_channel_chain(const ModelGraph& m) {
  int channels = -1;
  for (const auto& l : m.layers()) {
    if (l.kind != LayerKind::kConv && l.kind != LayerKind::kConvTranspose && l.kind != LayerKind::kBatchNorm) continue;
    if (channels >= 0) CHECK(l.in_channels == channels);
    channels = l.out_channels;
  }
}

}  // namespace

TEST_CASE("generator contract") {
  ModelOptions opts;  // 64x64, latent 100, base 32
  auto g = build_generator(opts);
  auto census = audit_layers(g);
  CHECK(census.conv_transpose == 5);
  CHECK(census.batchnorm == 4);
  CHECK(census.relu == 4);
  CHECK(census.tanh == 1);
  CHECK(census.conv == 0);
  CHECK(census.all_conv_kernels_4x4);
  check_channel_chain(g);
  CHECK(g.layers().back().kind == LayerKind::kActivation);

  Tape tape(false);
  auto out = g.forward(tape, noise(16, 100, 1), ops::Mode::kTrain);
  CHECK(out.shape() == Shape{16, 1, 64, 64});
  for (double v : out.data()) CHECK((v >= -1.0 && v <= 1.0));

  opts.image_size = 48;
  CHECK_THROWS_AS(build_generator(opts), Error);
  opts.image_size = 16;
  opts.latent_dim = 0;
  CHECK_THROWS_AS(build_generator(opts), Error);
}

TEST_CASE("smaller generators keep the ladder shape") {
  for (int size : {8, 16, 32}) {
    ModelOptions opts;
    opts.image_size = size;
    opts.latent_dim = 8;
    opts.base_channels = 4;
    auto g = build_generator(opts);
    auto c = audit_layers(g);
    CHECK(c.conv_transpose == c.batchnorm + 1);
    CHECK(c.relu == c.batchnorm);
    CHECK(c.tanh == 1);
    Tape tape(false);
    CHECK(g.forward(tape, noise(2, 8, 2), ops::Mode::kEval).shape() == Shape{2, 1, size, size});
  }
}

TEST_CASE("discriminator contract") {
  ModelOptions opts;
  auto d = build_discriminator(opts);
  auto census = audit_layers(d);
  CHECK(census.conv == 5);
  CHECK(census.batchnorm == 3);
  CHECK(census.leaky_relu == 4);
  CHECK(census.sigmoid == 1);
  CHECK(census.all_conv_kernels_4x4);
  check_channel_chain(d);
  // No batch-norm directly after the first convolution.
  CHECK(d.layers()[1].kind == LayerKind::kActivation);

  std::mt19937_64 rng(4);
  auto images = gdl::testing::random_tensor(rng, {16, 1, 64, 64}, DType::kF32, -1.0, 1.0);
  Tape tape(false);
  auto p = d.forward(tape, images, ops::Mode::kTrain);
  CHECK(p.shape() == Shape{16});
  for (double v : p.data()) CHECK((v > 0.0 && v < 1.0));

  CHECK_THROWS_AS(d.forward(tape, gdl::testing::random_tensor(rng, {2, 1, 32, 32}), ops::Mode::kEval), Error);
}

TEST_CASE("backbones") {
  for (auto kind : {ModelKind::kAlexNetMini, ModelKind::kSqueezeNetMini, ModelKind::kGoogLeNetMini,
                    ModelKind::kResNet18Mini}) {
    CAPTURE(model_kind_name(kind));
    for (int size : {16, 32}) {
      ModelOptions opts;
      opts.image_size = size;
      opts.base_channels = 8;
      opts.seed = 3;
      auto m = build_backbone(kind, opts);
      CHECK(m.has_head());
      std::mt19937_64 rng(8);
      auto x = gdl::testing::random_tensor(rng, {4, 1, size, size}, DType::kF32, 0.0, 1.0);
      Tape t1(false), t2(false);
      auto a = m.forward(t1, x, ops::Mode::kEval);
      auto b = build_backbone(kind, opts).forward(t2, x, ops::Mode::kEval);
      CHECK(a.shape() == Shape{4, 2});
      CHECK(std::vector<double>(a.data().begin(), a.data().end()) == std::vector<double>(b.data().begin(), b.data().end()));
    }
  }
  ModelOptions opts;
  opts.image_size = 32;
  opts.base_channels = 16;
  CHECK(build_backbone(ModelKind::kResNet18Mini, opts).parameter_count() >
        build_backbone(ModelKind::kSqueezeNetMini, opts).parameter_count());
  opts.image_size = 8;
  CHECK_THROWS_AS(build_backbone(ModelKind::kResNet18Mini, opts), Error);
}

TEST_CASE("residual block with zero convolutions is the identity") {
  ModelOptions opts;
  opts.image_size = 16;
  opts.base_channels = 8;
  auto full = build_backbone(ModelKind::kResNet18Mini, opts);
  const LayerSpec& block = full.layers()[1];
  REQUIRE(block.kind == LayerKind::kResidualBlock);

  ParameterSet params;
  ParameterSet buffers;
  for (const auto& [name, value] : full.parameters()) {
    if (name.starts_with(block.name + ".")) {
      auto copy = value.clone();
      if (name.find(".conv") != std::string::npos) {
        for (auto& v : copy.mutable_data()) v = 0.0;
      }
      params.add(name, copy);
    }
  }
  for (const auto& [name, value] : full.buffers()) {
    if (name.starts_with(block.name + ".")) buffers.add(name, value.clone());
  }
  ModelMetadata meta = full.metadata();
  meta.input_shape = {8, 16, 16};
  ModelGraph single(meta, {block}, params, buffers);
  std::mt19937_64 rng(2);
  auto x = gdl::testing::random_tensor(rng, {2, 8, 16, 16}, DType::kF32);
  for (auto mode : {ops::Mode::kTrain, ops::Mode::kEval}) {
    Tape tape(false);
    auto y = single.forward(tape, x, mode);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>(x.data().begin(), x.data().end()));
  }
}

TEST_CASE("inception and fire blocks concatenate their branches") {
  ModelOptions opts;
  opts.image_size = 16;
  opts.base_channels = 8;
  auto g = build_backbone(ModelKind::kGoogLeNetMini, opts);
  for (const auto& l : g.layers()) {
    if (l.kind != LayerKind::kInceptionBlock) continue;
    CHECK(l.out_channels == l.widths[0] + l.widths[2] + l.widths[4] + l.widths[5]);
  }
  const LayerSpec& block = g.layers()[3];
  REQUIRE(block.kind == LayerKind::kInceptionBlock);
  ParameterSet params;
  for (const auto& [name, value] : g.parameters()) {
    if (name.starts_with(block.name + ".")) params.add(name, value);
  }
  ModelMetadata meta = g.metadata();
  meta.input_shape = {block.in_channels, 8, 8};
  ModelGraph single(meta, {block}, params, {});
  Tape tape(false);
  auto y = single.forward(tape, Tensor::full({1, block.in_channels, 8, 8}, 0.5), ops::Mode::kEval);
  CHECK(y.dim(1) == block.widths[0] + block.widths[2] + block.widths[4] + block.widths[5]);

  auto s = build_backbone(ModelKind::kSqueezeNetMini, opts);
  for (const auto& l : s.layers()) {
    if (l.kind == LayerKind::kFireModule) {
      CHECK(l.out_channels == l.widths[1] + l.widths[2]);
      CHECK(l.widths[0] < l.in_channels);
    }
  }
}

TEST_CASE("freeze_backbone") {
  ModelOptions opts;
  opts.image_size = 16;
  opts.base_channels = 8;
  auto m = build_backbone(ModelKind::kAlexNetMini, opts);
  auto gen = build_generator(ModelOptions{16, 4, 4});
  CHECK_THROWS_AS(freeze_backbone(gen, true), Error);
  auto g = build_discriminator(ModelOptions{16, 4, 4});
  try {
    freeze_backbone(g, true);
    FAIL("expected NoHead");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoHead);
  }

  freeze_backbone(m, true);
  std::mt19937_64 rng(1);
  auto x = gdl::testing::random_tensor(rng, {4, 1, 16, 16}, DType::kF32, 0.0, 1.0);
  std::vector<int> labels{0, 1, 0, 1};
  {
    Tape tape;
    tape.backward(ops::softmax_cross_entropy(tape, m.forward(tape, x, ops::Mode::kTrain), labels));
  }
  for (const auto& [name, value] : m.parameters()) {
    const auto g = value.grad_or_zero();
    const bool any = std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
    if (name.starts_with(kHeadPrefix)) {
      CHECK(any);
    } else {
      CHECK_FALSE(any);
    }
  }
  freeze_backbone(m, false);
  CHECK(m.trainable_parameters().size() == m.parameters().size());
}

TEST_CASE("tiny generator gradients match finite differences") {
  ModelOptions opts;
  opts.image_size = 8;
  opts.latent_dim = 3;
  opts.base_channels = 2;
  opts.dtype = DType::kF64;
  opts.seed = 5;
  auto g = build_generator(opts);
  // Larger weights so the check is not dominated by the tiny init scale.
  std::mt19937_64 rng(6);
  for (auto& [name, value] : g.parameters()) {
    auto fresh = gdl::testing::random_tensor(rng, value.shape(), DType::kF64, -1.0, 1.0);
    value = fresh.set_requires_grad(true);
  }
  auto z = noise(2, 3, 9, DType::kF64);
  std::vector<double> targets(2 * 64);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<double>((i * 7) % 3 == 0);
  std::vector<std::string> names;
  std::vector<Tensor> params;
  for (const auto& [name, value] : g.parameters()) {
    names.push_back(name);
    params.push_back(value);
  }
  auto model = g.clone();
  auto loss = [&](Tape& tape, const std::vector<Tensor>& in) {
    for (std::size_t i = 0; i < names.size(); ++i) model.parameters().at(names[i]) = in[i];
    auto img = model.forward(tape, z, ops::Mode::kTrain);
    auto p = ops::mul(tape, ops::add(tape, img, Tensor::scalar(1.0, DType::kF64)), Tensor::scalar(0.5, DType::kF64));
    return ops::bce(tape, p, Tensor::from(p.shape(), targets, DType::kF64));
  };
  auto result = gdl::testing::check_gradients(loss, params);
  CHECK(result.checked == static_cast<std::size_t>(g.parameter_count()));
  CHECK(result.max_rel_error <= 1e-3);
}
