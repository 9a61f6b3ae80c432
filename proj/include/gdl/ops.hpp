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

#include <span>
#include <vector>

#include "gdl/tensor.hpp"

namespace gdl::ops {

enum class Elementwise { kAdd, kSub, kMul, kNeg, kLog, kExp };

// Binary kinds accept equal shapes or a single-element operand on either side.
Tensor elementwise(Tape& tape, Elementwise kind, const Tensor& a, const Tensor& b = {});

inline Tensor add(Tape& t, const Tensor& a, const Tensor& b) { return elementwise(t, Elementwise::kAdd, a, b); }
inline Tensor sub(Tape& t, const Tensor& a, const Tensor& b) { return elementwise(t, Elementwise::kSub, a, b); }
inline Tensor mul(Tape& t, const Tensor& a, const Tensor& b) { return elementwise(t, Elementwise::kMul, a, b); }
inline Tensor neg(Tape& t, const Tensor& a) { return elementwise(t, Elementwise::kNeg, a); }
inline Tensor log(Tape& t, const Tensor& a) { return elementwise(t, Elementwise::kLog, a); }
inline Tensor exp(Tape& t, const Tensor& a) { return elementwise(t, Elementwise::kExp, a); }

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Cross-correlation; input NCHW, weight OIHW.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding);

// Adjoint of conv2d; input NCHW, weight IOHW (I = input channels).
Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding);

enum class Mode { kTrain, kEval };

struct RunningStats {
  Tensor mean;
  Tensor var;
  double momentum = 0.1;
};

// Train mode normalizes with the biased batch variance and folds the unbiased
// variance into the running statistics.
Tensor batchnorm2d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps, Mode mode,
                   RunningStats& stats);

enum class Activation { kRelu, kLeakyRelu, kTanh, kSigmoid };

Tensor activation(Tape& tape, Activation kind, const Tensor& input, double alpha = 0.2);

inline Tensor relu(Tape& t, const Tensor& x) { return activation(t, Activation::kRelu, x); }
inline Tensor leaky_relu(Tape& t, const Tensor& x, double alpha) { return activation(t, Activation::kLeakyRelu, x, alpha); }
inline Tensor tanh(Tape& t, const Tensor& x) { return activation(t, Activation::kTanh, x); }
inline Tensor sigmoid(Tape& t, const Tensor& x) { return activation(t, Activation::kSigmoid, x); }

inline constexpr double kBceEpsilon = 1e-7;

// Mean binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7].
Tensor bce(Tape& tape, const Tensor& prediction, const Tensor& target);

// Mean over rows of -log softmax(logits)[target]; logits are (N, C).
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets);

// Adds bias[c] along axis 1 (rank 2 or rank 4 inputs).
Tensor bias_add(Tape& tape, const Tensor& input, const Tensor& bias);

inline Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
  return b.defined() ? bias_add(t, matmul(t, x, w), b) : matmul(t, x, w);
}

Tensor reshape(Tape& tape, const Tensor& input, Shape shape);
Tensor flatten(Tape& tape, const Tensor& input);
Tensor concat_channels(Tape& tape, std::span<const Tensor> inputs);
Tensor max_pool2d(Tape& tape, const Tensor& input, int kernel, int stride, int padding);
Tensor global_avg_pool(Tape& tape, const Tensor& input);
Tensor sum(Tape& tape, const Tensor& input);
Tensor mean(Tape& tape, const Tensor& input);

std::int64_t conv_output_size(std::int64_t in, std::int64_t kernel, int stride, int padding);
std::int64_t conv_transpose_output_size(std::int64_t in, std::int64_t kernel, int stride, int padding);

}  // namespace gdl::ops
