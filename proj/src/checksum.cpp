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

#include "gdl/checksum.hpp"

#include <bit>
#include <cstdio>

namespace gdl {

void Fnv1a::update(std::span<const std::byte> bytes) {
  for (std::byte b : bytes) {
    state_ ^= static_cast<std::uint64_t>(b);
    state_ *= 1099511628211ull;
  }
}

void Fnv1a::update(std::string_view text) { update(std::as_bytes(std::span(text.data(), text.size()))); }

void Fnv1a::update_double(double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    auto b = static_cast<std::byte>((bits >> (8 * i)) & 0xff);
    update(std::span(&b, 1));
  }
}

void Fnv1a::update_float(float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) {
    auto b = static_cast<std::byte>((bits >> (8 * i)) & 0xff);
    update(std::span(&b, 1));
  }
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace gdl
