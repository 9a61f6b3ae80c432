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

#include "grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace gdl::testing {

namespace {

Tensor as_f64(const Tensor& t) {
  auto values = std::vector<double>(t.data().begin(), t.data().end());
  return Tensor::from(t.shape(), std::move(values), DType::kF64);
}

double eval(const LossFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape(false);
  return fn(tape, inputs).item();
}

}  // namespace

GradCheck check_gradients(const LossFn& fn, const std::vector<Tensor>& inputs, double step) {
  std::vector<Tensor> leaves;
  for (const auto& in : inputs) {
    auto leaf = in.clone();
    leaf.clear_grad();
    leaf.set_requires_grad(true);
    leaves.push_back(leaf);
  }
  {
    Tape tape;
    auto loss = fn(tape, leaves);
    tape.backward(loss);
  }

  std::vector<Tensor> probe;
  for (const auto& in : inputs) probe.push_back(as_f64(in));

  GradCheck result;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto analytic = leaves[i].grad_or_zero();
    auto values = probe[i].mutable_data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = eval(fn, probe);
      values[k] = saved - step;
      const double down = eval(fn, probe);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-3});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic[k] - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

Tensor project(Tape& tape, const Tensor& out, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> r(static_cast<std::size_t>(out.numel()));
  for (auto& v : r) v = u(rng);
  auto weights = Tensor::from(out.shape(), std::move(r), out.dtype());
  return ops::sum(tape, ops::mul(tape, out, weights));
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, DType dtype, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), dtype);
}

std::vector<double> conv2d_direct(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * padding - kh) / stride + 1;
  const auto ow = (wd + 2 * padding - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n * o * oh * ow), 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          double acc = bias.defined() ? bias.at(oc) : 0.0;
          for (std::int64_t ic = 0; ic < c; ++ic)
            for (std::int64_t ki = 0; ki < kh; ++ki)
              for (std::int64_t kj = 0; kj < kw; ++kj) {
                const auto y = i * stride - padding + ki;
                const auto xx = j * stride - padding + kj;
                if (y < 0 || y >= h || xx < 0 || xx >= wd) continue;
                acc += x.at(((b * c + ic) * h + y) * wd + xx) * w.at(((oc * c + ic) * kh + ki) * kw + kj);
              }
          out[static_cast<std::size_t>(((b * o + oc) * oh + i) * ow + j)] = acc;
        }
  return out;
}

std::vector<double> conv_transpose2d_direct(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                                            int padding) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h - 1) * stride - 2 * padding + kh;
  const auto ow = (wd - 1) * stride - 2 * padding + kw;
  std::vector<double> out(static_cast<std::size_t>(n * o * oh * ow), 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t k = 0; k < oh * ow; ++k)
        out[static_cast<std::size_t>((b * o + oc) * oh * ow + k)] = bias.defined() ? bias.at(oc) : 0.0;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ic = 0; ic < c; ++ic)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < wd; ++j)
          for (std::int64_t oc = 0; oc < o; ++oc)
            for (std::int64_t ki = 0; ki < kh; ++ki)
              for (std::int64_t kj = 0; kj < kw; ++kj) {
                const auto y = i * stride - padding + ki;
                const auto xx = j * stride - padding + kj;
                if (y < 0 || y >= oh || xx < 0 || xx >= ow) continue;
                out[static_cast<std::size_t>(((b * o + oc) * oh + y) * ow + xx)] +=
                    x.at(((b * c + ic) * h + i) * wd + j) * w.at(((ic * o + oc) * kh + ki) * kw + kj);
              }
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace gdl::testing
