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

#include "gdl/dataset.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "gdl/checksum.hpp"
#include "gdl/error.hpp"

namespace gdl {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_image_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm";
}

std::vector<std::size_t> indices_with_label(const Dataset& d, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    if (d.records[i].label == label) out.push_back(i);
  }
  return out;
}

Dataset select(const Dataset& d, std::vector<std::size_t> keep) {
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.image_size = d.image_size;
  out.records.reserve(keep.size());
  for (auto i : keep) out.records.push_back(d.records[i]);
  return out;
}

}  // namespace

int parse_class_name(std::string_view name) {
  const auto l = lower(std::string(name));
  for (int i = 0; i < static_cast<int>(kClassNames.size()); ++i) {
    if (l == lower(kClassNames[static_cast<std::size_t>(i)])) return i;
  }
  fail(ErrorCode::kConfigError, "unknown class name '" + std::string(name) + "' (expected Normal or Pneumonia)");
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ImageRecord& r) { return r.label == label; }));
}

std::size_t Dataset::count_provenance(Provenance provenance) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ImageRecord& r) { return r.provenance == provenance; }));
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

bool decode_image(const fs::path& path, int target_size, std::vector<float>& pixels) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) return false;
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default: return false;
  }
  cv::Mat as_float;
  raw.convertTo(as_float, CV_32F, scale);
  cv::Mat gray;
  switch (as_float.channels()) {
    case 1: gray = as_float; break;
    case 3: cv::cvtColor(as_float, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(as_float, gray, cv::COLOR_BGRA2GRAY); break;
    default: return false;
  }
  cv::Mat sized;
  if (gray.rows == target_size && gray.cols == target_size) {
    sized = gray;
  } else {
    cv::resize(gray, sized, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
  }
  pixels.resize(static_cast<std::size_t>(target_size) * static_cast<std::size_t>(target_size));
  for (int r = 0; r < target_size; ++r) {
    const float* row = sized.ptr<float>(r);
    for (int c = 0; c < target_size; ++c) {
      float v = row[c];
      if (!std::isfinite(v)) return false;
      pixels[static_cast<std::size_t>(r * target_size + c)] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return true;
}

LoadResult load_image_directory(const fs::path& root, int target_size) {
  if (target_size < 1) fail(ErrorCode::kInvalidHyperparameter, "target size must be positive");
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    fail(ErrorCode::kMissingClassDir, "data root " + root.string() + " is not a directory");
  }
  LoadResult result;
  result.dataset.image_size = target_size;
  for (std::size_t label = 0; label < kClassNames.size(); ++label) {
    fs::path class_dir;
    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && lower(entry.path().filename().string()) == lower(kClassNames[label])) {
        candidates.push_back(entry.path());
      }
    }
    if (candidates.empty()) {
      fail(ErrorCode::kMissingClassDir, "missing class directory " + (root / kClassNames[label]).string());
    }
    std::sort(candidates.begin(), candidates.end());
    class_dir = candidates.front();

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ImageRecord rec;
      if (!decode_image(file, target_size, rec.pixels)) {
        result.undecodable.push_back(file.string());
        continue;
      }
      rec.id = std::string(kClassNames[label]) + "/" + file.filename().string();
      rec.label = static_cast<int>(label);
      rec.provenance = Provenance::kReal;
      result.dataset.records.push_back(std::move(rec));
    }
  }
  if (result.dataset.empty()) fail(ErrorCode::kEmptyDataset, "no decodable images under " + root.string());
  return result;
}

Dataset subsample_fraction(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorCode::kInvalidHyperparameter, "subsample fraction must lie in (0, 1]");
  }
  if (dataset.empty()) fail(ErrorCode::kEmptyDataset, "cannot subsample an empty dataset");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (int label = 0; label < static_cast<int>(kClassNames.size()); ++label) {
    auto idx = indices_with_label(dataset, label);
    const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(want, idx.size())));
  }
  return select(dataset, std::move(keep));
}

const char* split_order_name(SplitOrder order) {
  return order == SplitOrder::kSplitAfterAugment ? "split_after_augment" : "split_before_augment";
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    fail(ErrorCode::kInvalidHyperparameter, "train fraction must lie in (0, 1)");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    for (int label = 0; label < static_cast<int>(kClassNames.size()); ++label) {
      auto idx = indices_with_label(dataset, label);
      if (idx.empty()) continue;
      if (idx.size() < 2) {
        fail(ErrorCode::kTooSmall, std::string("stratified split needs at least 2 images of class ") +
                                       kClassNames[static_cast<std::size_t>(label)]);
      }
      groups.push_back(std::move(idx));
    }
    if (groups.empty()) fail(ErrorCode::kTooSmall, "cannot split an empty dataset");
  } else {
    if (dataset.size() < 2) fail(ErrorCode::kTooSmall, "split needs at least 2 images");
    std::vector<std::size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    groups.push_back(std::move(all));
  }
  std::vector<std::size_t> train, test;
  for (auto& idx : groups) {
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(idx.size())));
    std::shuffle(idx.begin(), idx.end(), rng);
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  return {select(dataset, std::move(train)), select(dataset, std::move(test))};
}

FixtureKind parse_fixture_kind(std::string_view name) {
  if (name == "bars") return FixtureKind::kBars;
  if (name == "blobs") return FixtureKind::kBlobs;
  fail(ErrorCode::kConfigError, "unknown fixture kind '" + std::string(name) + "' (expected bars or blobs)");
}

const char* fixture_kind_name(FixtureKind kind) { return kind == FixtureKind::kBars ? "bars" : "blobs"; }

Dataset synth_fixture_dataset(FixtureKind kind, int per_class, int size, double noise, std::uint64_t seed) {
  if (per_class < 1) fail(ErrorCode::kInvalidHyperparameter, "fixture needs at least one image per class");
  if (size < 8) fail(ErrorCode::kInvalidHyperparameter, "fixture image size must be >= 8");
  if (noise < 0.0) fail(ErrorCode::kInvalidHyperparameter, "fixture noise must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int thickness = std::max(1, size / 8);
  const double sigma = size / 6.0;
  Dataset out;
  out.image_size = size;
  const auto n = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);

  auto bump = [&](std::vector<double>& img, double cy, double cx) {
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        img[static_cast<std::size_t>(r * size + c)] += std::exp(-d2 / (2.0 * sigma * sigma));
      }
  };

  for (int label = 0; label < 2; ++label) {
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> img(n, 0.0);
      if (kind == FixtureKind::kBars) {
        std::uniform_int_distribution<int> pos(1, size - 1 - thickness);
        const int at = pos(rng);
        for (int t = 0; t < thickness; ++t)
          for (int k = 0; k < size; ++k) {
            const int r = label == 0 ? at + t : k;
            const int c = label == 0 ? k : at + t;
            img[static_cast<std::size_t>(r * size + c)] = 1.0;
          }
      } else {
        std::uniform_real_distribution<double> jitter(-size / 10.0, size / 10.0);
        const double mid = (size - 1) / 2.0;
        if (label == 0) {
          bump(img, mid + jitter(rng), mid + jitter(rng));
        } else {
          bump(img, mid + jitter(rng), size * 0.25 + jitter(rng));
          bump(img, mid + jitter(rng), size * 0.75 - 1.0 + jitter(rng));
        }
      }
      ImageRecord rec;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%s-%05d", fixture_kind_name(kind), label == 0 ? "normal" : "pneumonia", i);
      rec.id = id;
      rec.label = label;
      rec.pixels.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double v = img[k] + (noise > 0.0 ? noise * gauss(rng) : 0.0);
        rec.pixels[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

Tensor images_to_tensor(const Dataset& dataset, std::span<const std::size_t> indices, DType dtype, bool signed_range) {
  const auto s = static_cast<std::int64_t>(dataset.image_size);
  const auto n = static_cast<std::int64_t>(indices.size());
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(n * s * s));
  for (auto i : indices) {
    const auto& px = dataset.records.at(i).pixels;
    if (static_cast<std::int64_t>(px.size()) != s * s) {
      fail(ErrorCode::kSizeMismatch, "record " + dataset.records[i].id + " does not match the dataset image size");
    }
    for (float p : px) v.push_back(signed_range ? 2.0 * p - 1.0 : p);
  }
  if (n == 0) fail(ErrorCode::kEmptyBatch, "empty image batch");
  return Tensor::from({n, 1, s, s}, std::move(v), dtype);
}

void write_png(const fs::path& path, std::span<const float> pixels, int size) {
  cv::Mat img(size, size, CV_8UC1);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const float v = std::clamp(pixels[static_cast<std::size_t>(r * size + c)], 0.0f, 1.0f);
      img.at<unsigned char>(r, c) = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  if (!cv::imwrite(path.string(), img)) fail(ErrorCode::kIoError, "cannot write image " + path.string());
}

void write_image_directory(const Dataset& dataset, const fs::path& root) {
  for (const auto* name : kClassNames) fs::create_directories(root / name);
  for (const auto& rec : dataset.records) {
    auto stem = fs::path(rec.id).filename().replace_extension().string();
    write_png(root / kClassNames[static_cast<std::size_t>(rec.label)] / (stem + ".png"), rec.pixels, dataset.image_size);
  }
}

std::string dataset_manifest(const Dataset& dataset) {
  std::ostringstream out;
  out << "# gdl dataset manifest\n";
  out << "# image_size " << dataset.image_size << " records " << dataset.size() << " normal "
      << dataset.count_label(kNormal) << " pneumonia " << dataset.count_label(kPneumonia) << "\n";
  for (const auto& rec : dataset.records) {
    Fnv1a h;
    for (float p : rec.pixels) h.update_float(p);
    out << rec.id << '\t' << kClassNames[static_cast<std::size_t>(rec.label)] << '\t'
        << (rec.provenance == Provenance::kReal ? "real" : "synthetic") << '\t' << hex64(h.digest()) << '\n';
  }
  return out.str();
}

}  // namespace gdl
