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

#include "gdl/augment.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "gdl/error.hpp"
#include "gdl/training.hpp"

namespace gdl {

namespace {

constexpr std::int64_t kGenerationBatch = 64;

}  // namespace

AugmentationPlan plan_augmentation(const Dataset& dataset, int multiplier, std::uint64_t seed) {
  if (multiplier < 1) fail(ErrorCode::kInvalidHyperparameter, "augmentation multiplier must be >= 1");
  if (dataset.empty()) fail(ErrorCode::kEmptyDataset, "cannot plan augmentation of an empty dataset");
  AugmentationPlan plan;
  plan.multiplier = multiplier;
  plan.seed = seed;
  for (int label = 0; label < 2; ++label) {
    const auto i = static_cast<std::size_t>(label);
    plan.real_counts[i] = dataset.count_label(label);
    plan.synthetic_counts[i] = static_cast<std::size_t>(multiplier - 1) * plan.real_counts[i];
  }
  if (plan.total_real() != dataset.size()) fail(ErrorCode::kInvalidLabel, "dataset holds labels outside {0, 1}");
  return plan;
}

Dataset generate_synthetic(const AugmentationPlan& plan, int image_size) {
  Dataset out;
  out.image_size = image_size;
  for (int label = 0; label < 2; ++label) {
    const auto count = plan.synthetic_counts[static_cast<std::size_t>(label)];
    if (count == 0) continue;
    const auto& gen = plan.generators[static_cast<std::size_t>(label)];
    const char* cls = kClassNames[static_cast<std::size_t>(label)];
    if (!gen || !gen->trained()) {
      fail(ErrorCode::kUntrainedGenerator, std::string("no trained generator for class ") + cls);
    }
    const auto& meta = gen->metadata();
    if (meta.kind != ModelKind::kGenerator) fail(ErrorCode::kUntrainedGenerator, std::string(cls) + " handle is not a generator");
    if (meta.image_size != image_size) {
      fail(ErrorCode::kSizeMismatch, std::string(cls) + " generator produces " + std::to_string(meta.image_size) +
                                         " px images, dataset needs " + std::to_string(image_size));
    }
    std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                      static_cast<std::uint32_t>(label)};
    std::mt19937_64 rng(seq);
    const auto pixels = static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size);
    for (std::size_t done = 0; done < count;) {
      const auto n = std::min<std::int64_t>(kGenerationBatch, static_cast<std::int64_t>(count - done));
      const auto z = sample_noise(rng, n, meta.latent_dim, meta.dtype);
      Tape tape(false);
      const Tensor batch = generate(*gen, tape, z, ops::Mode::kEval);
      const auto images = batch.data();
      for (std::int64_t k = 0; k < n; ++k, ++done) {
        ImageRecord rec;
        char id[96];
        std::snprintf(id, sizeof id, "synthetic/%s/gan-%05zu", cls, done);
        rec.id = id;
        rec.label = label;
        rec.provenance = Provenance::kSynthetic;
        rec.pixels.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
          const double v = (images[static_cast<std::size_t>(k) * pixels + p] + 1.0) / 2.0;
          rec.pixels[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        out.records.push_back(std::move(rec));
      }
    }
  }
  return out;
}

Dataset merge_datasets(const Dataset& real, const Dataset& synthetic) {
  if (real.empty()) return synthetic;
  if (synthetic.empty()) return real;
  if (real.image_size != synthetic.image_size) {
    fail(ErrorCode::kSizeMismatch, "cannot merge " + std::to_string(real.image_size) + " px and " +
                                       std::to_string(synthetic.image_size) + " px datasets");
  }
  Dataset out = real;
  out.records.insert(out.records.end(), synthetic.records.begin(), synthetic.records.end());
  return out;
}

}  // namespace gdl
