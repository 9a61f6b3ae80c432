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
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gdl/dataset.hpp"
#include "gdl/models.hpp"

namespace gdl {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

OptimizerConfig gan_optimizer_defaults();
OptimizerConfig classifier_optimizer_defaults();

// Adam or plain SGD over named parameters. Moments are kept in double
// precision and keyed by parameter name.
class OptimizerState {
 public:
  explicit OptimizerState(OptimizerConfig config = {});

  const OptimizerConfig& config() const { return config_; }
  std::int64_t step_count() const { return t_; }

  // Updates every parameter that requires a gradient, then clears all gradients
  // in `params`. Throws MissingGradient if a trainable parameter has none.
  void step(ParameterSet& params);
  void step(ModelGraph& model) { step(model.parameters()); }

  // Moment accumulators for the parameter, empty before its first Adam step.
  const std::vector<double>* first_moment(const std::string& name) const;
  const std::vector<double>* second_moment(const std::string& name) const;

  // Entries: "t", "m/<param>", "v/<param>"; all f64.
  ParameterSet export_state() const;
  void import_state(const ParameterSet& state);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  OptimizerConfig config_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

enum class GeneratorLoss { kNonSaturating, kMinimax };

const char* generator_loss_name(GeneratorLoss loss);
GeneratorLoss parse_generator_loss(std::string_view name);

struct GanTrainConfig {
  int iterations = 2000;
  int batch_size = 32;
  int latent_dim = 100;
  int d_steps = 1;
  GeneratorLoss generator_loss = GeneratorLoss::kNonSaturating;
  OptimizerConfig g_optimizer = gan_optimizer_defaults();
  OptimizerConfig d_optimizer = gan_optimizer_defaults();
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> log_path;  // JSON lines, one per iteration
};

struct TrainingReport {
  // GAN runs: one entry per iteration.
  std::vector<double> g_loss;
  std::vector<double> d_loss;
  std::vector<double> d_real;
  std::vector<double> d_fake;
  // Classifier runs: mean training loss per epoch.
  std::vector<double> loss;
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;
};

// Mean of the trailing `fraction` of a series (at least one element).
double tail_mean(std::span<const double> series, double fraction = 0.1);

// Empirical mean log D(x) + mean log(1 - D(G(z))) from raw probabilities.
double minimax_value(std::span<const double> d_real, std::span<const double> d_fake);
// Same quantity evaluated through the models without recording gradients.
double minimax_value(ModelGraph& discriminator, ModelGraph& generator, const Tensor& real_batch,
                     const Tensor& noise_batch, ops::Mode mode = ops::Mode::kEval);

struct GanStepMetrics {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
};

Tensor sample_noise(std::mt19937_64& rng, std::int64_t n, std::int64_t latent_dim, DType dtype);

// One discriminator update on real (label 1) and fake (label 0) batches. The
// fakes are used as constants, so no gradient reaches the generator.
GanStepMetrics discriminator_step(ModelGraph& discriminator, OptimizerState& d_opt, const Tensor& real_batch,
                                  const Tensor& fake_batch);

// Generator objective on noise `z`, recorded on `tape`.
Tensor generator_objective(Tape& tape, ModelGraph& generator, ModelGraph& discriminator, const Tensor& z,
                           GeneratorLoss variant);

// One generator update; discriminator gradients are discarded.
double generator_step(ModelGraph& generator, ModelGraph& discriminator, OptimizerState& g_opt, const Tensor& z,
                      GeneratorLoss variant);

// One round of d_steps discriminator updates followed by one generator update.
// `real_batch` is (N, 1, S, S) in [-1, 1].
GanStepMetrics gan_train_step(ModelGraph& generator, ModelGraph& discriminator, OptimizerState& g_opt,
                              OptimizerState& d_opt, const Tensor& real_batch, std::mt19937_64& rng,
                              const GanTrainConfig& config);

// Trains an existing generator/discriminator pair on a single-class dataset.
TrainingReport train_gan(ModelGraph& generator, ModelGraph& discriminator, const Dataset& dataset,
                         const GanTrainConfig& config);

struct ClassifierTrainConfig {
  int epochs = 10;
  int batch_size = 32;
  OptimizerConfig optimizer = classifier_optimizer_defaults();
  bool freeze_backbone = false;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> log_path;  // JSON lines, one per epoch
};

TrainingReport train_classifier(ModelGraph& model, const Dataset& train_set, const ClassifierTrainConfig& config);

// Arg-max class per record, evaluated without gradients in eval mode.
std::vector<int> predict(ModelGraph& model, const Dataset& dataset, int batch_size = 64);

}  // namespace gdl
