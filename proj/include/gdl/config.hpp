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
#include <string>
#include <string_view>

#include "gdl/dataset.hpp"
#include "gdl/models.hpp"
#include "gdl/training.hpp"

namespace gdl {

enum class DataSourceKind { kDirectory, kFixture };

struct DataSourceConfig {
  DataSourceKind source = DataSourceKind::kDirectory;
  std::filesystem::path root;
  FixtureKind fixture = FixtureKind::kBars;
  int per_class = 200;
  double noise = 0.15;
  std::uint64_t seed = 0;
};

struct GanSettings {
  int base_channels = 32;
  DType dtype = DType::kF32;
  // A stub skips adversarial training and samples from the freshly built
  // generator; useful for exercising the count arithmetic quickly.
  bool stub = false;
  GanTrainConfig train;
};

struct ClassifierSettings {
  ModelKind backbone = ModelKind::kResNet18Mini;
  int base_channels = 16;
  DType dtype = DType::kF32;
  ClassifierTrainConfig train;
  std::filesystem::path init_checkpoint;  // empty: random initialisation
};

struct RunConfig {
  DataSourceConfig data;
  std::filesystem::path output_dir = "gdl_run";
  SplitOrder order = SplitOrder::kSplitBeforeAugment;
  double subsample_fraction = 1.0;
  bool augment = true;
  int multiplier = 10;
  int image_size = 64;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  GanSettings gan;
  ClassifierSettings classifier;
};

// Parses a JSON document over the defaults; unknown keys and wrongly typed
// values are ConfigError with the offending key path.
RunConfig parse_run_config(std::string_view json_text, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});

// Overrides one field: `key` is a dotted path ("gan.iterations"), `json_value`
// a JSON literal ("200", "\"paper\"", "true").
void set_config_value(RunConfig& config, std::string_view key, std::string_view json_value);

std::string run_config_json(const RunConfig& config, int indent = 2);

void validate_run_config(const RunConfig& config);

// Independent stream seed for a named pipeline phase.
std::uint64_t phase_seed(std::uint64_t global_seed, std::string_view phase);

}  // namespace gdl
