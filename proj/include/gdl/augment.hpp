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

#include <array>
#include <cstdint>
#include <memory>

#include "gdl/dataset.hpp"
#include "gdl/models.hpp"

namespace gdl {

struct AugmentationPlan {
  std::array<std::size_t, 2> real_counts{};
  std::array<std::size_t, 2> synthetic_counts{};
  int multiplier = 10;
  // One generator per class, indexed by label.
  std::array<std::shared_ptr<ModelGraph>, 2> generators;
  std::uint64_t seed = 0;

  std::size_t total_real() const { return real_counts[0] + real_counts[1]; }
  std::size_t total_synthetic() const { return synthetic_counts[0] + synthetic_counts[1]; }
};

// synthetic = (multiplier - 1) x real, per class.
AugmentationPlan plan_augmentation(const Dataset& dataset, int multiplier = 10, std::uint64_t seed = 0);

// Samples the planned number of images from each class generator (eval mode)
// and maps them from [-1, 1] to [0, 1]. Each class draws from its own stream.
Dataset generate_synthetic(const AugmentationPlan& plan, int image_size);

// Real records first, then synthetic, each in its original order.
Dataset merge_datasets(const Dataset& real, const Dataset& synthetic);

}  // namespace gdl
