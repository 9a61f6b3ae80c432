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

// Test-only oracles: central finite differences and direct-loop convolutions.
// Nothing here calls the im2col/GEMM paths in src/ops.cpp.

#include <functional>
#include <random>
#include <vector>

#include "gdl/ops.hpp"

namespace gdl::testing {

using LossFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, 1e-3), maximized over every element of every input.
// Analytic gradients are taken in the inputs' dtype; the numeric side always
// re-evaluates `fn` on f64 copies with a central difference of `step`.
GradCheck check_gradients(const LossFn& fn, const std::vector<Tensor>& inputs, double step = 1e-4);

// sum(out * R) with R drawn from a fixed stream; turns any op into a scalar loss.
Tensor project(Tape& tape, const Tensor& out, unsigned seed = 7);

Tensor random_tensor(std::mt19937_64& rng, Shape shape, DType dtype = DType::kF64, double lo = -2.0, double hi = 2.0);

std::vector<double> conv2d_direct(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);
std::vector<double> conv_transpose2d_direct(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                                            int padding);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace gdl::testing
