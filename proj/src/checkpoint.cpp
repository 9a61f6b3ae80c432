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

#include "gdl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "gdl/error.hpp"

namespace gdl {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'G', 'D', 'L', 'C'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (n > remaining()) fail(ErrorCode::kCorruptArchive, std::string("truncated archive while reading ") + what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename T>
  T le(const char* what) {
    auto s = take(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(s[i]) << (8 * i));
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Tensor meta_scalar(double v) { return Tensor::scalar(v, DType::kF64); }

int meta_int(const ParameterSet& archive, const char* name) {
  if (!archive.contains(name)) fail(ErrorCode::kCorruptArchive, std::string("model archive lacks ") + name);
  const auto& t = archive.at(name);
  if (t.numel() != 1) fail(ErrorCode::kCorruptArchive, std::string(name) + " is not a scalar");
  const double v = t.item();
  if (v < 0 || v > 1e9 || v != static_cast<double>(static_cast<int>(v))) {
    fail(ErrorCode::kCorruptArchive, std::string(name) + " is not a valid integer");
  }
  return static_cast<int>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_archive(const ParameterSet& entries) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kArchiveVersion);
  w.le<std::uint64_t>(entries.size());
  for (const auto& [name, value] : entries) {
    if (value.rank() > static_cast<std::int64_t>(kMaxArchiveRank)) {
      fail(ErrorCode::kIoError, "tensor " + name + " has rank above " + std::to_string(kMaxArchiveRank));
    }
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(value.dtype()));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(value.rank()));
    for (auto d : value.shape()) w.le<std::uint64_t>(static_cast<std::uint64_t>(d));
    for (double v : value.data()) {
      if (value.dtype() == DType::kF32) {
        w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return w.take();
}

ParameterSet decode_archive(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) fail(ErrorCode::kCorruptArchive, "bad magic (not a GDLC archive)");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kArchiveVersion) {
    fail(ErrorCode::kCorruptArchive, "unsupported archive version " + std::to_string(version));
  }
  const auto count = r.le<std::uint64_t>("entry count");
  ParameterSet out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = r.le<std::uint32_t>("name length");
    auto name_bytes = r.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto dtype_code = r.le<std::uint8_t>("dtype");
    if (dtype_code > 1) fail(ErrorCode::kCorruptArchive, "unknown dtype code " + std::to_string(dtype_code));
    const auto dtype = static_cast<DType>(dtype_code);
    const auto rank = r.le<std::uint8_t>("rank");
    if (rank > kMaxArchiveRank) fail(ErrorCode::kCorruptArchive, "rank " + std::to_string(rank) + " exceeds 8");
    Shape shape;
    const std::size_t width = dtype == DType::kF32 ? 4 : 8;
    std::uint64_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto d = r.le<std::uint64_t>("dims");
      if (d == 0) fail(ErrorCode::kCorruptArchive, "zero dimension in " + name);
      if (numel > std::numeric_limits<std::uint64_t>::max() / d || numel * d > r.remaining() / width + 1) {
        fail(ErrorCode::kCorruptArchive, "dimension overflow in " + name);
      }
      numel *= d;
      shape.push_back(static_cast<std::int64_t>(d));
    }
    if (numel > r.remaining() / width) fail(ErrorCode::kCorruptArchive, "truncated payload for " + name);
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (auto& v : values) {
      if (dtype == DType::kF32) {
        v = static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>("payload")));
      } else {
        v = std::bit_cast<double>(r.le<std::uint64_t>("payload"));
      }
    }
    if (out.contains(name)) fail(ErrorCode::kCorruptArchive, "duplicate entry " + name);
    out.add(std::move(name), Tensor::from(std::move(shape), std::move(values), dtype));
  }
  if (r.remaining() != 0) fail(ErrorCode::kCorruptArchive, "trailing bytes after the last entry");
  return out;
}

void save_checkpoint(const ParameterSet& entries, const fs::path& path) {
  const auto bytes = encode_archive(entries);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

ParameterSet load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

ParameterSet model_archive(const ModelGraph& model, const ParameterSet* optimizer_state) {
  const auto& m = model.metadata();
  ParameterSet a;
  a.add("meta/kind", meta_scalar(static_cast<double>(m.kind)));
  a.add("meta/image_size", meta_scalar(m.image_size));
  a.add("meta/latent_dim", meta_scalar(m.latent_dim));
  a.add("meta/base_channels", meta_scalar(m.base_channels));
  a.add("meta/num_classes", meta_scalar(m.num_classes));
  a.add("meta/dtype", meta_scalar(static_cast<double>(m.dtype)));
  a.add("meta/trained", meta_scalar(model.trained() ? 1.0 : 0.0));
  for (const auto& [name, value] : model.parameters()) a.add("param/" + name, value);
  for (const auto& [name, value] : model.buffers()) a.add("buffer/" + name, value);
  if (optimizer_state) {
    for (const auto& [name, value] : *optimizer_state) a.add("optim/" + name, value);
  }
  return a;
}

ModelGraph model_from_archive(const ParameterSet& archive, ParameterSet* optimizer_state) {
  ModelMetadata meta;
  const int kind = meta_int(archive, "meta/kind");
  if (kind > static_cast<int>(ModelKind::kResNet18Mini)) fail(ErrorCode::kCorruptArchive, "unknown model kind");
  meta.kind = static_cast<ModelKind>(kind);
  meta.image_size = meta_int(archive, "meta/image_size");
  meta.latent_dim = meta_int(archive, "meta/latent_dim");
  meta.base_channels = meta_int(archive, "meta/base_channels");
  meta.num_classes = meta_int(archive, "meta/num_classes");
  const int dtype = meta_int(archive, "meta/dtype");
  if (dtype > 1) fail(ErrorCode::kCorruptArchive, "unknown model dtype");
  meta.dtype = static_cast<DType>(dtype);

  ModelGraph model = [&] {
    try {
      return build_model(meta);
    } catch (const Error& e) {
      fail(ErrorCode::kCorruptArchive, std::string("archive describes an invalid model: ") + e.what());
    }
  }();
  auto restore = [&](ParameterSet& set, const std::string& prefix) {
    for (auto& [name, value] : set) {
      const auto key = prefix + name;
      if (!archive.contains(key)) fail(ErrorCode::kCorruptArchive, "model archive lacks " + key);
      const auto& stored = archive.at(key);
      if (stored.shape() != value.shape() || stored.dtype() != value.dtype()) {
        fail(ErrorCode::kCorruptArchive, key + " has shape " + shape_str(stored.shape()) + ", expected " +
                                             shape_str(value.shape()));
      }
      const bool grad = value.requires_grad();
      value = stored.clone();
      value.set_requires_grad(grad);
    }
  };
  restore(model.parameters(), "param/");
  restore(model.buffers(), "buffer/");
  model.set_trained(meta_int(archive, "meta/trained") == 1);

  if (optimizer_state) {
    *optimizer_state = ParameterSet{};
    for (const auto& [name, value] : archive) {
      if (name.starts_with("optim/")) optimizer_state->add(name.substr(6), value.clone());
    }
  }
  return model;
}

void save_model(const ModelGraph& model, const fs::path& path, const ParameterSet* optimizer_state) {
  save_checkpoint(model_archive(model, optimizer_state), path);
}

ModelGraph load_model(const fs::path& path, ParameterSet* optimizer_state) {
  return model_from_archive(load_checkpoint(path), optimizer_state);
}

}  // namespace gdl
