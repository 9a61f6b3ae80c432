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

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "gdl/checkpoint.hpp"
#include "gdl/dataset.hpp"
#include "gdl/error.hpp"
#include "gdl/models.hpp"

using namespace gdl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gdl_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_pgm(const fs::path& path, int size, unsigned char value) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << size << " " << size << "\n255\n";
  for (int i = 0; i < size * size; ++i) out.put(static_cast<char>(value));
}

Dataset labelled(int normal, int pneumonia) {
  Dataset ds;
  ds.image_size = 2;
  for (int i = 0; i < normal + pneumonia; ++i) {
    ImageRecord r;
    r.id = "img" + std::to_string(i);
    r.label = i < normal ? kNormal : kPneumonia;
    r.pixels.assign(4, static_cast<float>(i % 7) / 7.0f);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

std::set<std::string> ids(const Dataset& ds) {
  std::set<std::string> out;
  for (const auto& r : ds.records) out.insert(r.id);
  return out;
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    FAIL("expected " << error_code_name(code));
  } catch (const Error& e) {
    CHECK_MESSAGE(e.code() == code, e.what());
  }
}

}  // namespace

TEST_CASE("image directory loading") {
  auto root = scratch("load");
  fs::create_directories(root / "NORMAL");
  fs::create_directories(root / "Pneumonia");
  for (int i = 0; i < 3; ++i) write_pgm(root / "NORMAL" / ("n" + std::to_string(i) + ".pgm"), 12, 128);
  for (int i = 0; i < 5; ++i) write_pgm(root / "Pneumonia" / ("p" + std::to_string(i) + ".pgm"), 20, 255);
  std::ofstream(root / "Pneumonia" / "broken.png") << "not an image";

  auto a = load_image_directory(root, 8);
  CHECK(a.dataset.size() == 8);
  CHECK(a.dataset.count_label(kNormal) == 3);
  CHECK(a.dataset.count_label(kPneumonia) == 5);
  CHECK(a.undecodable.size() == 1);
  CHECK(a.dataset.records[0].pixels.size() == 64);
  CHECK(a.dataset.records[0].pixels[10] == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
  CHECK(a.dataset.records[5].pixels[0] == doctest::Approx(1.0));

  auto b = load_image_directory(root, 8);
  CHECK(dataset_manifest(a.dataset) == dataset_manifest(b.dataset));

  auto missing = scratch("missing");
  fs::create_directories(missing / "Normal");
  write_pgm(missing / "Normal" / "x.pgm", 8, 1);
  expect_code(ErrorCode::kMissingClassDir, [&] { load_image_directory(missing, 8); });
}

TEST_CASE("written images load back") {
  auto ds = synth_fixture_dataset(FixtureKind::kBars, 3, 16, 0.0, 4);
  auto root = scratch("roundtrip");
  write_image_directory(ds, root);
  auto back = load_image_directory(root, 16).dataset;
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < ds.records[i].pixels.size(); ++k) {
      CHECK(std::abs(back.records[i].pixels[k] - ds.records[i].pixels[k]) <= 0.5f / 255.0f + 1e-6f);
    }
  }
}

TEST_CASE("subsampling") {
  auto ds = labelled(1583, 4273);
  auto same = subsample_fraction(ds, 1.0, 9);
  CHECK(dataset_manifest(same) == dataset_manifest(ds));

  auto small = subsample_fraction(ds, 0.1065, 1);
  CHECK(small.size() >= 623);
  CHECK(small.size() <= 625);
  CHECK(small.count_label(kNormal) == 169);
  CHECK(small.count_label(kPneumonia) == 455);

  std::set<std::set<std::string>> distinct;
  for (std::uint64_t s : {1, 2, 3}) distinct.insert(ids(subsample_fraction(ds, 0.1065, s)));
  CHECK(distinct.size() == 3);
  CHECK(ids(subsample_fraction(ds, 0.1065, 2)) == ids(subsample_fraction(ds, 0.1065, 2)));
}

TEST_CASE("stratified split arithmetic") {
  SplitSpec spec;
  spec.seed = 5;
  auto [train, test] = split_dataset(labelled(50, 50), spec);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  CHECK(train.count_label(kNormal) == 40);
  CHECK(test.count_label(kPneumonia) == 10);

  auto [t624, e624] = split_dataset(labelled(234, 390), spec);
  CHECK(t624.size() == 499);
  CHECK(e624.size() == 125);

  auto [t6240, e6240] = split_dataset(labelled(2340, 3900), spec);
  CHECK(t6240.size() == 4992);
  CHECK(e6240.size() == 1248);

  expect_code(ErrorCode::kTooSmall, [&] { split_dataset(labelled(1, 10), spec); });
}

TEST_CASE("split is disjoint and exhaustive") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int a = 2 + static_cast<int>(rng() % 60);
    const int b = 2 + static_cast<int>(rng() % 60);
    SplitSpec spec;
    spec.seed = trial;
    spec.train_fraction = 0.5 + 0.4 * (rng() % 100) / 100.0;
    auto ds = labelled(a, b);
    auto [train, test] = split_dataset(ds, spec);
    auto tr = ids(train), te = ids(test);
    CHECK(tr.size() + te.size() == ds.size());
    std::vector<std::string> both;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
    CHECK(both.empty());
    CHECK(train.count_label(kNormal) >= 1);
    CHECK(test.count_label(kPneumonia) >= 1);
  }
}

TEST_CASE("bar and blob fixtures") {
  auto bars = synth_fixture_dataset(FixtureKind::kBars, 20, 16, 0.0, 3);
  CHECK(bars.count_label(kNormal) == 20);
  CHECK(bars.count_label(kPneumonia) == 20);
  int correct = 0;
  for (const auto& r : bars.records) {
    double row_max = 0, col_max = 0;
    for (int i = 0; i < 16; ++i) {
      double rs = 0, cs = 0;
      for (int j = 0; j < 16; ++j) {
        rs += r.pixels[static_cast<std::size_t>(i * 16 + j)];
        cs += r.pixels[static_cast<std::size_t>(j * 16 + i)];
      }
      row_max = std::max(row_max, rs);
      col_max = std::max(col_max, cs);
    }
    correct += (row_max > col_max ? kNormal : kPneumonia) == r.label;
  }
  CHECK(correct == 40);
  CHECK(dataset_manifest(bars) == dataset_manifest(synth_fixture_dataset(FixtureKind::kBars, 20, 16, 0.0, 3)));
  CHECK(dataset_manifest(bars) != dataset_manifest(synth_fixture_dataset(FixtureKind::kBars, 20, 16, 0.0, 4)));

  auto blobs = synth_fixture_dataset(FixtureKind::kBlobs, 30, 8, 0.0, 1);
  double max_normal = 0, min_pneu = 1e9;
  for (const auto& r : blobs.records) {
    double centre = 0, sides = 0;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        const double v = r.pixels[static_cast<std::size_t>(y * 8 + x)];
        (x >= 3 && x <= 4 ? centre : sides) += v;
      }
    }
    const double score = sides - centre;
    if (r.label == kNormal) max_normal = std::max(max_normal, score);
    else min_pneu = std::min(min_pneu, score);
  }
  CHECK(max_normal < min_pneu);
}

TEST_CASE("images to tensor ranges") {
  auto ds = synth_fixture_dataset(FixtureKind::kBars, 2, 8, 0.0, 0);
  std::vector<std::size_t> idx{0, 3};
  auto t = images_to_tensor(ds, idx, DType::kF32, true);
  CHECK(t.shape() == Shape{2, 1, 8, 8});
  for (double v : t.data()) CHECK((v == -1.0 || v == 1.0));
  auto u = images_to_tensor(ds, idx, DType::kF64, false);
  CHECK(u.data()[64 + 27] == doctest::Approx(ds.records[3].pixels[27]));
}

TEST_CASE("archive round trip is bitwise") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-1e3, 1e3);
  ParameterSet set;
  for (int rank = 0; rank <= 8; ++rank) {
    for (DType dtype : {DType::kF32, DType::kF64}) {
      Shape shape;
      for (int k = 0; k < rank; ++k) shape.push_back(1 + static_cast<std::int64_t>(rng() % 2));
      std::vector<double> values(static_cast<std::size_t>(shape_numel(shape)));
      for (auto& v : values) v = dist(rng);
      values[0] = rank % 2 ? -0.0 : 1e-300;
      set.add("t" + std::to_string(rank) + dtype_name(dtype), Tensor::from(shape, values, dtype));
    }
  }
  auto bytes = encode_archive(set);
  auto back = decode_archive(bytes);
  REQUIRE(back.size() == set.size());
  for (const auto& [name, value] : set) {
    const auto& other = back.at(name);
    CHECK(other.shape() == value.shape());
    CHECK(other.dtype() == value.dtype());
    CHECK(std::memcmp(other.data().data(), value.data().data(), value.data().size() * sizeof(double)) == 0);
  }
  CHECK(encode_archive(back) == bytes);

  auto path = scratch("ckpt") / "set.gdlc";
  save_checkpoint(set, path);
  CHECK(encode_archive(load_checkpoint(path)) == bytes);

  CHECK(decode_archive(encode_archive(ParameterSet{})).empty());
}

TEST_CASE("corrupt archives are rejected") {
  ParameterSet set;
  set.add("w", Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, DType::kF64));
  auto bytes = encode_archive(set);

  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    expect_code(ErrorCode::kCorruptArchive, [&] { decode_archive(truncated); });
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  expect_code(ErrorCode::kCorruptArchive, [&] { decode_archive(bad_magic); });
  auto bad_version = bytes;
  bad_version[4] = 7;
  expect_code(ErrorCode::kCorruptArchive, [&] { decode_archive(bad_version); });
  auto trailing = bytes;
  trailing.push_back(0);
  expect_code(ErrorCode::kCorruptArchive, [&] { decode_archive(trailing); });
  expect_code(ErrorCode::kIoError, [&] { load_checkpoint("/nonexistent/file.gdlc"); });
}

TEST_CASE("models survive save and load") {
  ModelOptions o;
  o.image_size = 16;
  o.latent_dim = 8;
  o.base_channels = 8;
  o.seed = 11;
  std::vector<ModelGraph> models;
  models.push_back(build_generator(o));
  models.push_back(build_discriminator(o));
  for (auto kind : {ModelKind::kAlexNetMini, ModelKind::kSqueezeNetMini, ModelKind::kGoogLeNetMini,
                    ModelKind::kResNet18Mini}) {
    models.push_back(build_backbone(kind, o));
  }
  auto dir = scratch("models");
  for (auto& m : models) {
    m.set_trained(true);
    ParameterSet optim;
    optim.add("step", Tensor::scalar(3, DType::kF64));
    auto path = dir / (std::string(model_kind_name(m.metadata().kind)) + ".gdlc");
    save_model(m, path, &optim);
    ParameterSet optim_back;
    auto back = load_model(path, &optim_back);
    CHECK(back.checksum() == m.checksum());
    CHECK(back.metadata().kind == m.metadata().kind);
    CHECK(back.trained());
    CHECK(optim_back.at("step").item() == 3.0);
  }
}
