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
#include <span>
#include <vector>

#include "gdl/models.hpp"

namespace gdl {

// Archive layout, all integers little-endian:
//   "GDLC" | u32 version | u64 entry count | entries
//   entry: u32 name bytes | UTF-8 name | u8 dtype (0 f32, 1 f64) | u8 rank (<= 8)
//          | u64 dims[rank] | IEEE-754 payload, row-major
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kMaxArchiveRank = 8;

std::vector<std::uint8_t> encode_archive(const ParameterSet& entries);
ParameterSet decode_archive(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ParameterSet& entries, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

// Model archives add "meta/*" scalars describing the architecture, "param/*",
// "buffer/*" and, when given, "optim/*" entries.
ParameterSet model_archive(const ModelGraph& model, const ParameterSet* optimizer_state = nullptr);
ModelGraph model_from_archive(const ParameterSet& archive, ParameterSet* optimizer_state = nullptr);

void save_model(const ModelGraph& model, const std::filesystem::path& path, const ParameterSet* optimizer_state = nullptr);
ModelGraph load_model(const std::filesystem::path& path, ParameterSet* optimizer_state = nullptr);

}  // namespace gdl
