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
#include <optional>
#include <string>
#include <vector>

#include "gdl/config.hpp"
#include "gdl/dataset.hpp"
#include "gdl/metrics.hpp"
#include "gdl/training.hpp"

namespace gdl {

// Loads the configured source (directory or fixture) at config.image_size and
// applies the subsample fraction.
struct LoadedData {
  Dataset loaded;
  Dataset subsampled;
  std::vector<std::string> undecodable;
};
LoadedData load_run_data(const RunConfig& config);

struct IngestResult {
  Dataset dataset;
  std::vector<std::string> undecodable;
  std::string manifest;
};
IngestResult cmd_ingest(const std::filesystem::path& root, int image_size,
                        const std::optional<std::filesystem::path>& manifest_out);

struct GanCommandResult {
  TrainingReport report;
  std::filesystem::path generator_checkpoint;
  std::filesystem::path discriminator_checkpoint;
  std::filesystem::path log;
};
// Trains the GAN for one class on the configured data and writes
// generator_<class>.gdlc, discriminator_<class>.gdlc and gan_<class>.jsonl.
GanCommandResult cmd_train_gan(const RunConfig& config, int label);

// Writes `count` PNGs to out_dir/<Class>/; the class comes from the checkpoint
// unless `label` is given.
std::vector<std::filesystem::path> cmd_generate(const std::filesystem::path& checkpoint, int count,
                                                const std::filesystem::path& out_dir, std::uint64_t seed,
                                                std::optional<int> label = std::nullopt);

struct SplitCounts {
  std::size_t total = 0;
  std::size_t normal = 0;
  std::size_t pneumonia = 0;
  std::size_t real = 0;
  std::size_t synthetic = 0;
};
SplitCounts count_split(const Dataset& dataset);

struct PipelineResult {
  SplitCounts loaded;
  SplitCounts subsampled;
  SplitCounts synthetic;
  SplitCounts merged;  // paper mode: everything before the split; sound mode: the augmented train side
  SplitCounts train;
  SplitCounts test;
  bool gan_used = false;
  MetricsReport metrics;
  std::string metrics_text;
  std::string confusion_table;
  std::string summary_json;
  std::filesystem::path output_dir;
};

// Full run: subsample, per-class GANs, augmentation, split, classifier, evaluation.
// Artifacts land in config.output_dir; on failure whatever was produced is left
// under config.output_dir/failed/ together with error.json, and the error is rethrown.
PipelineResult run_pipeline(const RunConfig& config);

struct EvaluateResult {
  MetricsReport metrics;
  std::string metrics_text;
  std::string confusion_table;
};
EvaluateResult cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& data_root,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct TableVerification {
  int checked = 0;
  int mismatches = 0;
  int known_anomalies = 0;
  std::string report;
};
// Parses a matrices fixture and checks every published value against the
// metrics computed from its matrix. Malformed input is MalformedInput with the
// parse location.
TableVerification verify_tables_text(std::string_view json_text);
TableVerification cmd_verify_tables(const std::filesystem::path& matrices_file);

}  // namespace gdl
