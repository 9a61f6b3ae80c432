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
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdl/tensor.hpp"

namespace gdl {

// Class indices are alphabetical by directory name.
inline constexpr int kNormal = 0;
inline constexpr int kPneumonia = 1;
inline constexpr std::array<const char*, 2> kClassNames{"Normal", "Pneumonia"};

int parse_class_name(std::string_view name);  // throws ConfigError

enum class Provenance { kReal, kSynthetic };

struct ImageRecord {
  std::string id;
  std::vector<float> pixels;  // row-major, size x size, values in [0, 1]
  int label = kNormal;
  Provenance provenance = Provenance::kReal;
};

struct Dataset {
  int image_size = 0;
  std::vector<ImageRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t count_label(int label) const;
  std::size_t count_provenance(Provenance provenance) const;
  std::vector<int> labels() const;
};

struct LoadResult {
  Dataset dataset;
  std::vector<std::string> undecodable;  // paths skipped with a warning
};

// Expects <root>/Normal and <root>/Pneumonia (matched case-insensitively).
LoadResult load_image_directory(const std::filesystem::path& root, int target_size);

// Grayscale via ITU-R BT.601 luma, bilinear resize, scaled to [0, 1].
// Returns false when the file cannot be decoded.
bool decode_image(const std::filesystem::path& path, int target_size, std::vector<float>& pixels);

// Stratified: each class keeps round(fraction * count) records, chosen by `seed`,
// in their original order.
Dataset subsample_fraction(const Dataset& dataset, double fraction, std::uint64_t seed);

enum class SplitOrder { kSplitAfterAugment, kSplitBeforeAugment };

const char* split_order_name(SplitOrder order);

struct SplitSpec {
  double train_fraction = 0.8;
  bool stratified = true;
  std::uint64_t seed = 0;
  SplitOrder order = SplitOrder::kSplitBeforeAugment;
};

// Train side gets floor(fraction * n) per class (or overall when unstratified);
// both sides keep the input order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitSpec& spec);

enum class FixtureKind { kBars, kBlobs };

FixtureKind parse_fixture_kind(std::string_view name);
const char* fixture_kind_name(FixtureKind kind);

// bars: class 0 has a horizontal bright bar, class 1 a vertical one.
// blobs: class 0 has one Gaussian bump, class 1 two.
Dataset synth_fixture_dataset(FixtureKind kind, int per_class, int size, double noise, std::uint64_t seed);

// NCHW batch of the selected records. `signed_range` maps [0, 1] to [-1, 1].
Tensor images_to_tensor(const Dataset& dataset, std::span<const std::size_t> indices, DType dtype, bool signed_range);

// Writes <root>/<ClassName>/<id-stem>.png as 8-bit grayscale.
void write_image_directory(const Dataset& dataset, const std::filesystem::path& root);
void write_png(const std::filesystem::path& path, std::span<const float> pixels, int size);

// One line per record: id, label, provenance, FNV-1a of the pixel bytes.
std::string dataset_manifest(const Dataset& dataset);

}  // namespace gdl
