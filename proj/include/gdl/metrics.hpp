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
#include <optional>
#include <span>
#include <string>

namespace gdl {

// counts[predicted][actual]; row 0/column 0 is Normal.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 2>, 2> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int predicted) const;
  std::int64_t column_sum(int actual) const;
  std::int64_t trace() const { return counts[0][0] + counts[1][1]; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix make_confusion(std::int64_t pn_an, std::int64_t pn_ap, std::int64_t pp_an, std::int64_t pp_ap);

ConfusionMatrix confusion_from_predictions(std::span<const int> predicted, std::span<const int> actual);

// A ratio whose denominator was zero is std::nullopt ("not applicable").
using Ratio = std::optional<double>;

double accuracy(const ConfusionMatrix& cm);
std::array<Ratio, 2> per_class_precision(const ConfusionMatrix& cm);  // diagonal / row sum
std::array<Ratio, 2> per_class_recall(const ConfusionMatrix& cm);     // diagonal / column sum

struct MetricsReport {
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  std::array<Ratio, 2> precision;
  std::array<Ratio, 2> recall;
  double macro_precision = 0.0;  // not-applicable classes count as 0
  double macro_recall = 0.0;
  double f1 = 0.0;  // harmonic mean of the two macro values
  // The published tables label the column-wise macro "precision" and the
  // row-wise macro "recall"; these carry that convention explicitly.
  double paper_precision = 0.0;
  double paper_recall = 0.0;
};

MetricsReport metrics_report(const ConfusionMatrix& cm);

// "key value" lines, fixed order, values with 6 decimals.
std::string metrics_key_values(const MetricsReport& report);

// Grid with counts and share of total per cell, precision margins on the right,
// recall margins at the bottom and accuracy in the corner (one decimal).
std::string render_confusion_table(const ConfusionMatrix& cm);

// Percentage with the given number of decimals, or "n/a".
std::string format_percent(const Ratio& value, int decimals);

}  // namespace gdl
