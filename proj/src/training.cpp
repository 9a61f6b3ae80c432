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

#include "gdl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gdl/checksum.hpp"
#include "gdl/error.hpp"
#include "gdl/ops.hpp"
#include "json.hpp"

namespace gdl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Wraps an op failure that stems from a non-finite value so the caller sees
// where training diverged.
template <typename Fn>
auto guard_finite(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kOverflow) fail(ErrorCode::kNonFiniteLoss, where + ": " + e.what());
    throw;
  }
}

double checked_loss(const Tensor& loss, const std::string& where) {
  const double v = loss.item();
  if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteLoss, where + ": loss is " + std::to_string(v));
  return v;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::uint64_t pair_checksum(const ModelGraph& a, const ModelGraph& b) {
  Fnv1a h;
  h.update(hex64(a.checksum()));
  h.update(hex64(b.checksum()));
  return h.digest();
}

class JsonLog {
 public:
  explicit JsonLog(const std::optional<std::filesystem::path>& path) {
    if (!path) return;
    out_.open(*path, std::ios::trunc);
    if (!out_) fail(ErrorCode::kIoError, "cannot open training log " + path->string());
  }
  void write(const nlohmann::json& record) {
    if (out_.is_open()) out_ << record.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace

OptimizerConfig gan_optimizer_defaults() { return {OptimizerKind::kAdam, 2e-4, 0.5, 0.999, 1e-8}; }

OptimizerConfig classifier_optimizer_defaults() { return {OptimizerKind::kAdam, 1e-3, 0.9, 0.999, 1e-8}; }

OptimizerState::OptimizerState(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0) || !std::isfinite(config_.learning_rate)) {
    fail(ErrorCode::kInvalidHyperparameter, "learning rate must be positive");
  }
  if (config_.kind == OptimizerKind::kAdam &&
      (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0 ||
       !(config_.eps > 0.0))) {
    fail(ErrorCode::kInvalidHyperparameter, "adam betas must lie in [0, 1) and eps must be positive");
  }
}

void OptimizerState::step(ParameterSet& params) {
  for (const auto& [name, value] : params) {
    if (value.requires_grad() && !value.has_grad()) {
      fail(ErrorCode::kMissingGradient, "parameter " + name + " has no gradient");
    }
  }
  ++t_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& [name, value] : params) {
    if (!value.requires_grad()) {
      value.clear_grad();
      continue;
    }
    const auto g = value.grad();
    auto p = value.mutable_data();
    const DType dtype = value.dtype();
    if (config_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = round_to(dtype, p[i] - lr * g[i]);
    } else {
      auto& mom = moments_[name];
      if (mom.m.size() != p.size()) {
        mom.m.assign(p.size(), 0.0);
        mom.v.assign(p.size(), 0.0);
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g[i];
        mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = mom.m[i] / c1;
        const double vhat = mom.v[i] / c2;
        p[i] = round_to(dtype, p[i] - lr * mhat / (std::sqrt(vhat) + config_.eps));
      }
    }
    value.clear_grad();
  }
}

const std::vector<double>* OptimizerState::first_moment(const std::string& name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? nullptr : &it->second.m;
}

const std::vector<double>* OptimizerState::second_moment(const std::string& name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? nullptr : &it->second.v;
}

ParameterSet OptimizerState::export_state() const {
  ParameterSet out;
  out.add("t", Tensor::scalar(static_cast<double>(t_), DType::kF64));
  for (const auto& [name, mom] : moments_) {
    const auto n = static_cast<std::int64_t>(mom.m.size());
    out.add("m/" + name, Tensor::from({n}, mom.m, DType::kF64));
    out.add("v/" + name, Tensor::from({n}, mom.v, DType::kF64));
  }
  return out;
}

void OptimizerState::import_state(const ParameterSet& state) {
  if (!state.contains("t")) fail(ErrorCode::kCorruptArchive, "optimizer state lacks a step counter");
  const double t = state.at("t").item();
  if (t < 0 || t != std::floor(t)) fail(ErrorCode::kCorruptArchive, "optimizer step counter is not a count");
  std::map<std::string, Moments> moments;
  for (const auto& [key, value] : state) {
    if (key.starts_with("m/")) {
      const auto name = key.substr(2);
      const auto vkey = "v/" + name;
      if (!state.contains(vkey) || state.at(vkey).numel() != value.numel()) {
        fail(ErrorCode::kCorruptArchive, "optimizer moments for " + name + " are inconsistent");
      }
      auto& mom = moments[name];
      mom.m.assign(value.data().begin(), value.data().end());
      const auto v = state.at(vkey).data();
      mom.v.assign(v.begin(), v.end());
    }
  }
  t_ = static_cast<std::int64_t>(t);
  moments_ = std::move(moments);
}

const char* generator_loss_name(GeneratorLoss loss) {
  return loss == GeneratorLoss::kMinimax ? "minimax" : "non_saturating";
}

GeneratorLoss parse_generator_loss(std::string_view name) {
  if (name == "minimax") return GeneratorLoss::kMinimax;
  if (name == "non_saturating") return GeneratorLoss::kNonSaturating;
  fail(ErrorCode::kConfigError, "unknown generator loss '" + std::string(name) + "'");
}

double tail_mean(std::span<const double> series, double fraction) {
  if (series.empty()) return 0.0;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * series.size())));
  return mean_of(series.subspan(series.size() - std::min(n, series.size())));
}

double minimax_value(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) fail(ErrorCode::kEmptyBatch, "minimax value needs non-empty batches");
  double real = 0.0, fake = 0.0;
  for (double p : d_real) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::kDomainError, "discriminator output outside (0, 1)");
    real += std::log(p);
  }
  for (double p : d_fake) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::kDomainError, "discriminator output outside (0, 1)");
    fake += std::log1p(-p);
  }
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

double minimax_value(ModelGraph& discriminator, ModelGraph& generator, const Tensor& real_batch,
                     const Tensor& noise_batch, ops::Mode mode) {
  if (!real_batch.defined() || !noise_batch.defined() || real_batch.numel() == 0 || noise_batch.numel() == 0) {
    fail(ErrorCode::kEmptyBatch, "minimax value needs non-empty batches");
  }
  Tape tape(false);
  const auto p_real = discriminator.forward(tape, real_batch, mode);
  const auto fake = generate(generator, tape, noise_batch, mode);
  const auto p_fake = discriminator.forward(tape, fake, mode);
  return minimax_value(p_real.data(), p_fake.data());
}

Tensor sample_noise(std::mt19937_64& rng, std::int64_t n, std::int64_t latent_dim, DType dtype) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n * latent_dim));
  for (auto& x : v) x = gauss(rng);
  return Tensor::from({n, latent_dim}, std::move(v), dtype);
}

GanStepMetrics discriminator_step(ModelGraph& discriminator, OptimizerState& d_opt, const Tensor& real_batch,
                                  const Tensor& fake_batch) {
  const DType dtype = discriminator.metadata().dtype;
  Tape tape;
  Tensor p_real, p_fake, loss;
  guard_finite("discriminator update", [&] {
    p_real = discriminator.forward(tape, real_batch, ops::Mode::kTrain);
    p_fake = discriminator.forward(tape, fake_batch.detach(), ops::Mode::kTrain);
    const auto ones = Tensor::full({real_batch.dim(0)}, 1.0, dtype);
    const auto zeros = Tensor::full({fake_batch.dim(0)}, 0.0, dtype);
    loss = ops::add(tape, ops::bce(tape, p_real, ones), ops::bce(tape, p_fake, zeros));
    return 0;
  });
  GanStepMetrics m;
  m.d_loss = checked_loss(loss, "discriminator update");
  m.d_real = mean_of(p_real.data());
  m.d_fake = mean_of(p_fake.data());
  tape.backward(loss);
  d_opt.step(discriminator);
  return m;
}

Tensor generator_objective(Tape& tape, ModelGraph& generator, ModelGraph& discriminator, const Tensor& z,
                           GeneratorLoss variant) {
  const auto fake = generate(generator, tape, z, ops::Mode::kTrain);
  const auto p = discriminator.forward(tape, fake, ops::Mode::kTrain);
  const auto n = p.dim(0);
  if (variant == GeneratorLoss::kNonSaturating) return ops::bce(tape, p, Tensor::full({n}, 1.0, p.dtype()));
  // Minimizing mean log(1 - D(G(z))) is the negated bce against label 0.
  return ops::neg(tape, ops::bce(tape, p, Tensor::full({n}, 0.0, p.dtype())));
}

double generator_step(ModelGraph& generator, ModelGraph& discriminator, OptimizerState& g_opt, const Tensor& z,
                      GeneratorLoss variant) {
  Tape tape;
  const auto loss =
      guard_finite("generator update", [&] { return generator_objective(tape, generator, discriminator, z, variant); });
  const double value = checked_loss(loss, "generator update");
  tape.backward(loss);
  discriminator.clear_grads();
  g_opt.step(generator);
  return value;
}

GanStepMetrics gan_train_step(ModelGraph& generator, ModelGraph& discriminator, OptimizerState& g_opt,
                              OptimizerState& d_opt, const Tensor& real_batch, std::mt19937_64& rng,
                              const GanTrainConfig& config) {
  const auto& dmeta = discriminator.metadata();
  Shape expected{real_batch.defined() && real_batch.rank() > 0 ? real_batch.dim(0) : 0};
  expected.insert(expected.end(), dmeta.input_shape.begin(), dmeta.input_shape.end());
  if (!real_batch.defined() || real_batch.shape() != expected || expected[0] < 1) {
    fail(ErrorCode::kShapeMismatch, "real batch " + (real_batch.defined() ? shape_str(real_batch.shape()) : "()") +
                                        " does not match discriminator input " + shape_str(dmeta.input_shape));
  }
  if (config.d_steps < 1) fail(ErrorCode::kInvalidHyperparameter, "d_steps must be >= 1");
  const std::int64_t n = real_batch.dim(0);
  const DType dtype = generator.metadata().dtype;
  const auto latent = static_cast<std::int64_t>(generator.metadata().latent_dim);

  GanStepMetrics metrics;
  for (int k = 0; k < config.d_steps; ++k) {
    const auto z = sample_noise(rng, n, latent, dtype);
    Tensor fake;
    {
      Tape no_grad(false);
      fake = guard_finite("generator forward", [&] { return generate(generator, no_grad, z, ops::Mode::kTrain); });
    }
    metrics = discriminator_step(discriminator, d_opt, real_batch, fake);
  }
  const auto z = sample_noise(rng, n, latent, dtype);
  metrics.g_loss = generator_step(generator, discriminator, g_opt, z, config.generator_loss);
  return metrics;
}

TrainingReport train_gan(ModelGraph& generator, ModelGraph& discriminator, const Dataset& dataset,
                         const GanTrainConfig& config) {
  if (config.iterations < 0) fail(ErrorCode::kInvalidHyperparameter, "iterations must be >= 0");
  if (config.batch_size < 1) fail(ErrorCode::kInvalidHyperparameter, "batch size must be >= 1");
  if (generator.metadata().kind != ModelKind::kGenerator || discriminator.metadata().kind != ModelKind::kDiscriminator) {
    fail(ErrorCode::kInvalidHyperparameter, "train_gan needs a generator and a discriminator");
  }
  if (config.latent_dim != generator.metadata().latent_dim) {
    fail(ErrorCode::kInvalidHyperparameter, "configured latent_dim " + std::to_string(config.latent_dim) +
                                                " differs from the generator's " +
                                                std::to_string(generator.metadata().latent_dim));
  }
  if (dataset.empty()) fail(ErrorCode::kEmptyDataset, "GAN training set is empty");
  for (const auto& r : dataset.records) {
    if (r.label != dataset.records.front().label) {
      fail(ErrorCode::kInvalidHyperparameter, "GAN training set must hold a single class");
    }
  }
  if (dataset.size() < static_cast<std::size_t>(config.batch_size)) {
    fail(ErrorCode::kTooSmall, "GAN training set has " + std::to_string(dataset.size()) +
                                   " images, fewer than the batch size " + std::to_string(config.batch_size));
  }
  if (dataset.image_size != generator.metadata().image_size ||
      dataset.image_size != discriminator.metadata().image_size) {
    fail(ErrorCode::kSizeMismatch, "dataset images are " + std::to_string(dataset.image_size) +
                                       " px but the GAN is built for " +
                                       std::to_string(generator.metadata().image_size) + " px");
  }

  TrainingReport report;
  const auto start = Clock::now();
  if (config.iterations == 0) {
    report.checksum = pair_checksum(generator, discriminator);
    return report;
  }

  std::mt19937_64 rng(config.seed);
  OptimizerState g_opt(config.g_optimizer);
  OptimizerState d_opt(config.d_optimizer);
  JsonLog log(config.log_path);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const DType dtype = discriminator.metadata().dtype;

  for (int it = 0; it < config.iterations; ++it) {
    if (cursor + bs > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    std::span<const std::size_t> batch(order.data() + cursor, bs);
    cursor += bs;
    const auto real = images_to_tensor(dataset, batch, dtype, true);
    GanStepMetrics m;
    try {
      m = gan_train_step(generator, discriminator, g_opt, d_opt, real, rng, config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFiniteLoss) throw;
      std::string diag = std::string(e.what()) + " at iteration " + std::to_string(it);
      if (!report.d_loss.empty()) {
        diag += " (previous d_loss " + std::to_string(report.d_loss.back()) + ", g_loss " +
                std::to_string(report.g_loss.back()) + ")";
      }
      fail(ErrorCode::kNonFiniteLoss, diag);
    }
    report.g_loss.push_back(m.g_loss);
    report.d_loss.push_back(m.d_loss);
    report.d_real.push_back(m.d_real);
    report.d_fake.push_back(m.d_fake);
    log.write({{"iteration", it}, {"g_loss", m.g_loss}, {"d_loss", m.d_loss}, {"d_real", m.d_real}, {"d_fake", m.d_fake}});
  }
  generator.set_trained(true);
  discriminator.set_trained(true);
  report.wall_seconds = seconds_since(start);
  report.checksum = pair_checksum(generator, discriminator);
  return report;
}

TrainingReport train_classifier(ModelGraph& model, const Dataset& train_set, const ClassifierTrainConfig& config) {
  if (!is_backbone(model.metadata().kind)) {
    fail(ErrorCode::kInvalidHyperparameter, "train_classifier needs a backbone model");
  }
  if (train_set.empty()) fail(ErrorCode::kEmptyDataset, "classifier training set is empty");
  if (config.epochs < 0) fail(ErrorCode::kInvalidHyperparameter, "epochs must be >= 0");
  if (config.batch_size < 1) fail(ErrorCode::kInvalidHyperparameter, "batch size must be >= 1");
  if (train_set.image_size != model.metadata().image_size) {
    fail(ErrorCode::kSizeMismatch, "training images are " + std::to_string(train_set.image_size) +
                                       " px but the model expects " + std::to_string(model.metadata().image_size));
  }
  const auto labels = train_set.labels();
  for (int y : labels) {
    if (y < 0 || y >= model.metadata().num_classes) {
      fail(ErrorCode::kInvalidTarget, "label " + std::to_string(y) + " is outside the model's classes");
    }
  }
  if (config.freeze_backbone) freeze_backbone(model, true);

  TrainingReport report;
  const auto start = Clock::now();
  std::mt19937_64 rng(config.seed);
  OptimizerState opt(config.optimizer);
  JsonLog log(config.log_path);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const DType dtype = model.metadata().dtype;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size();) {
      std::size_t end = std::min(order.size(), begin + bs);
      // A trailing singleton batch would leave batch norm without statistics.
      if (order.size() - end == 1) ++end;
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::vector<int> targets;
      for (auto i : batch) targets.push_back(labels[i]);
      const auto x = images_to_tensor(train_set, batch, dtype, true);
      Tape tape;
      const auto where = "classifier epoch " + std::to_string(epoch);
      const auto loss = guard_finite(where, [&] {
        return ops::softmax_cross_entropy(tape, model.forward(tape, x, ops::Mode::kTrain), targets);
      });
      total += checked_loss(loss, where) * static_cast<double>(batch.size());
      tape.backward(loss);
      opt.step(model);
      begin = end;
    }
    report.loss.push_back(total / static_cast<double>(order.size()));
    log.write({{"epoch", epoch}, {"loss", report.loss.back()}});
  }
  if (config.epochs > 0) model.set_trained(true);
  report.wall_seconds = seconds_since(start);
  report.checksum = model.checksum();
  return report;
}

std::vector<int> predict(ModelGraph& model, const Dataset& dataset, int batch_size) {
  if (batch_size < 1) fail(ErrorCode::kInvalidHyperparameter, "batch size must be >= 1");
  std::vector<int> out;
  out.reserve(dataset.size());
  const auto classes = static_cast<std::size_t>(model.metadata().num_classes);
  for (std::size_t begin = 0; begin < dataset.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(dataset.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    Tape tape(false);
    const auto logits = model.forward(tape, images_to_tensor(dataset, idx, model.metadata().dtype, true), ops::Mode::kEval);
    const auto v = logits.data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = v.subspan(i * classes, classes);
      out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

}  // namespace gdl
