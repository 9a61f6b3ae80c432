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

#include "gdl/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "gdl/dataset.hpp"
#include "gdl/error.hpp"

namespace gdl {

namespace {

Ratio ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string margin(const Ratio& r) {
  if (!r) return "n/a";
  return format_percent(r, 1) + " / " + format_percent(1.0 - *r, 1);
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

std::int64_t ConfusionMatrix::row_sum(int predicted) const {
  const auto& row = counts.at(static_cast<std::size_t>(predicted));
  return row[0] + row[1];
}

std::int64_t ConfusionMatrix::column_sum(int actual) const {
  const auto a = static_cast<std::size_t>(actual);
  return counts[0].at(a) + counts[1].at(a);
}

ConfusionMatrix make_confusion(std::int64_t pn_an, std::int64_t pn_ap, std::int64_t pp_an, std::int64_t pp_ap) {
  if (pn_an < 0 || pn_ap < 0 || pp_an < 0 || pp_ap < 0) {
    fail(ErrorCode::kDomainError, "confusion matrix counts must be non-negative");
  }
  ConfusionMatrix cm;
  cm.counts = {{{pn_an, pn_ap}, {pp_an, pp_ap}}};
  return cm;
}

ConfusionMatrix confusion_from_predictions(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    fail(ErrorCode::kLengthMismatch, std::to_string(predicted.size()) + " predictions for " +
                                         std::to_string(actual.size()) + " labels");
  }
  if (predicted.empty()) fail(ErrorCode::kLengthMismatch, "no predictions to tabulate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], a = actual[i];
    if (p < 0 || p > 1 || a < 0 || a > 1) {
      fail(ErrorCode::kInvalidLabel, "label pair (" + std::to_string(p) + ", " + std::to_string(a) + ") at index " +
                                         std::to_string(i) + " is outside {0, 1}");
    }
    ++cm.counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(a)];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) fail(ErrorCode::kEmptyMatrix, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

std::array<Ratio, 2> per_class_precision(const ConfusionMatrix& cm) {
  return {ratio(cm.counts[0][0], cm.row_sum(0)), ratio(cm.counts[1][1], cm.row_sum(1))};
}

std::array<Ratio, 2> per_class_recall(const ConfusionMatrix& cm) {
  return {ratio(cm.counts[0][0], cm.column_sum(0)), ratio(cm.counts[1][1], cm.column_sum(1))};
}

MetricsReport metrics_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.matrix = cm;
  r.accuracy = accuracy(cm);
  r.precision = per_class_precision(cm);
  r.recall = per_class_recall(cm);
  r.macro_precision = (r.precision[0].value_or(0.0) + r.precision[1].value_or(0.0)) / 2.0;
  r.macro_recall = (r.recall[0].value_or(0.0) + r.recall[1].value_or(0.0)) / 2.0;
  const double s = r.macro_precision + r.macro_recall;
  if (r.macro_precision == r.macro_recall) {
    r.f1 = r.macro_precision;  // 2pp/(2p) need not round back to p
  } else {
    r.f1 = s > 0.0 ? 2.0 * r.macro_precision * r.macro_recall / s : 0.0;
  }
  r.paper_precision = r.macro_recall;
  r.paper_recall = r.macro_precision;
  return r;
}

std::string format_percent(const Ratio& value, int decimals) {
  if (!value) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, *value * 100.0);
  return buf;
}

std::string metrics_key_values(const MetricsReport& r) {
  std::ostringstream out;
  auto line = [&](const char* key, const Ratio& v) {
    out << key << ' ';
    if (v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *v);
      out << buf;
    } else {
      out << "n/a";
    }
    out << '\n';
  };
  const auto& c = r.matrix.counts;
  out << "confusion " << c[0][0] << ' ' << c[0][1] << ' ' << c[1][0] << ' ' << c[1][1] << '\n';
  out << "total " << r.matrix.total() << '\n';
  line("accuracy", r.accuracy);
  line("precision_normal", r.precision[0]);
  line("precision_pneumonia", r.precision[1]);
  line("recall_normal", r.recall[0]);
  line("recall_pneumonia", r.recall[1]);
  line("macro_precision", r.macro_precision);
  line("macro_recall", r.macro_recall);
  line("f1", r.f1);
  line("paper_precision", r.paper_precision);
  line("paper_recall", r.paper_recall);
  return out.str();
}

std::string render_confusion_table(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  auto cell = [&](std::int64_t n) {
    std::ostringstream s;
    s << n << " (" << format_percent(total > 0 ? Ratio(n / total) : std::nullopt, 1) << ")";
    return s.str();
  };
  const auto precision = per_class_precision(cm);
  const auto recall = per_class_recall(cm);
  constexpr std::size_t kLabel = 18, kCol = 18;
  std::ostringstream out;
  out << pad("", kLabel) << pad("Target Normal", kCol) << pad("Target Pneumonia", kCol) << "Precision / Error\n";
  for (int p = 0; p < 2; ++p) {
    const auto row = static_cast<std::size_t>(p);
    out << pad(std::string("Output ") + kClassNames[row], kLabel) << pad(cell(cm.counts[row][0]), kCol)
        << pad(cell(cm.counts[row][1]), kCol) << margin(precision[row]) << '\n';
  }
  out << pad("Recall / Error", kLabel) << pad(margin(recall[0]), kCol) << pad(margin(recall[1]), kCol)
      << margin(total > 0 ? Ratio(accuracy(cm)) : std::nullopt) << '\n';
  return out.str();
}

}  // namespace gdl
