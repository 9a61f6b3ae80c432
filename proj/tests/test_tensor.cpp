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

#include <cmath>
#include <random>

#include "doctest.h"
#include "gdl/error.hpp"
#include "gdl/ops.hpp"
#include "grad_check.hpp"
#include "op_catalog.hpp"

using namespace gdl;
using gdl::testing::check_gradients;
using gdl::testing::max_abs_diff;
using gdl::testing::random_tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected gdl::Error");
  return ErrorCode::kConfigError;
}

}  // namespace

TEST_CASE("elementwise examples") {
  Tape tape;
  auto a = Tensor::from({2}, {1, 2});
  auto b = Tensor::from({2}, {3, 4});
  CHECK(values(ops::add(tape, a, b)) == std::vector<double>{4, 6});
  CHECK(ops::log(tape, Tensor::from({1}, {1.0})).item() == 0.0);
  CHECK(values(ops::mul(tape, a, Tensor::scalar(3.0))) == std::vector<double>{3, 6});
  CHECK(values(ops::sub(tape, Tensor::scalar(1.0), a)) == std::vector<double>{0, -1});

  CHECK(code_of([&] { ops::log(tape, Tensor::from({2}, {1.0, 0.0})); }) == ErrorCode::kDomainError);
  CHECK(code_of([&] { ops::add(tape, a, Tensor::from({3}, {1, 2, 3})); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { ops::exp(tape, Tensor::from({1}, {1000.0}, DType::kF64)); }) == ErrorCode::kOverflow);
  CHECK(code_of([&] { ops::exp(tape, Tensor::from({1}, {100.0}, DType::kF32)); }) == ErrorCode::kOverflow);
}

TEST_CASE("backward basics") {
  SUBCASE("square") {
    auto x = Tensor::from({1}, {3.0}, DType::kF64).set_requires_grad(true);
    Tape tape;
    tape.backward(ops::sum(tape, ops::mul(tape, x, x)));
    CHECK(x.grad()[0] == 6.0);
  }
  SUBCASE("scale") {
    auto x = Tensor::from({1}, {5.0}).set_requires_grad(true);
    Tape tape;
    tape.backward(ops::sum(tape, ops::mul(tape, Tensor::scalar(2.0), x)));
    CHECK(x.grad()[0] == 2.0);
  }
  SUBCASE("fan-out accumulates") {
    auto x = Tensor::from({1}, {5.0}).set_requires_grad(true);
    Tape tape;
    tape.backward(ops::sum(tape, ops::add(tape, x, x)));
    CHECK(x.grad()[0] == 2.0);
  }
  SUBCASE("repeated backward accumulates until cleared") {
    auto x = Tensor::from({1}, {5.0}).set_requires_grad(true);
    for (int i = 0; i < 2; ++i) {
      Tape tape;
      tape.backward(ops::sum(tape, x));
    }
    CHECK(x.grad()[0] == 2.0);
    x.clear_grad();
    CHECK_FALSE(x.has_grad());
  }
  SUBCASE("detached loss") {
    auto x = Tensor::from({1}, {5.0}).set_requires_grad(true);
    Tape a, b;
    auto loss = ops::sum(a, x);
    CHECK(code_of([&] { b.backward(loss); }) == ErrorCode::kDetachedTensor);
    CHECK(code_of([&] { a.backward(Tensor::scalar(1.0)); }) == ErrorCode::kDetachedTensor);
    Tape inference(false);
    auto y = ops::sum(inference, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(code_of([&] { inference.backward(y); }) == ErrorCode::kDetachedTensor);
  }
  SUBCASE("detach cuts the path") {
    auto x = Tensor::from({1}, {5.0}).set_requires_grad(true);
    auto w = Tensor::from({1}, {2.0}).set_requires_grad(true);
    Tape tape;
    auto h = ops::mul(tape, x, w);
    tape.backward(ops::sum(tape, ops::mul(tape, h.detach(), w)));
    CHECK_FALSE(x.has_grad());
    CHECK(w.grad()[0] == 10.0);
  }
}

TEST_CASE("tape records in topological order") {
  auto x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
  Tape tape;
  auto a = ops::exp(tape, x);
  auto b = ops::mul(tape, a, x);
  auto c = ops::sum(tape, b);
  CHECK(tape.size() == 3);
  auto constant = ops::add(tape, Tensor::scalar(1.0), Tensor::scalar(2.0));
  CHECK(tape.size() == 3);
  CHECK_FALSE(constant.requires_grad());
  tape.backward(c);
  CHECK(x.grad()[0] == doctest::Approx(std::exp(1.0) * 2.0).epsilon(1e-6));
}

TEST_CASE("matmul") {
  Tape tape;
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(values(ops::matmul(tape, eye, m)) == values(m));
  CHECK(ops::matmul(tape, Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})).item() == 11.0);
  CHECK(code_of([&] { ops::matmul(tape, m, Tensor::from({3, 1}, {1, 2, 3})); }) == ErrorCode::kShapeMismatch);

  std::mt19937_64 rng(3);
  auto a = random_tensor(rng, {3, 4}).set_requires_grad(true);
  auto b = random_tensor(rng, {4, 2});
  Tape t2;
  t2.backward(ops::sum(t2, ops::matmul(t2, a, b)));
  // d sum(AB) / dA = ones * B^T, i.e. row sums of B broadcast down the rows.
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t k = 0; k < 4; ++k) CHECK(a.grad()[static_cast<std::size_t>(i * 4 + k)] == doctest::Approx(b.at(k * 2) + b.at(k * 2 + 1)));
  auto check = check_gradients([b](Tape& t, const std::vector<Tensor>& in) { return ops::sum(t, ops::matmul(t, in[0], b)); },
                               {random_tensor(rng, {3, 4})});
  CHECK(check.max_rel_error <= 1e-4);
}

TEST_CASE("conv2d") {
  Tape tape;
  auto y = ops::conv2d(tape, Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), {}, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(values(y) == std::vector<double>(4, 4.0));
  CHECK(ops::conv_output_size(64, 4, 2, 1) == 32);

  std::mt19937_64 rng(11);
  auto x = random_tensor(rng, {2, 3, 8, 8});
  auto w = random_tensor(rng, {4, 3, 3, 3});
  auto b = random_tensor(rng, {4});
  auto fast = ops::conv2d(tape, x, w, b, 2, 1);
  CHECK(max_abs_diff(fast.data(), gdl::testing::conv2d_direct(x, w, b, 2, 1)) <= 1e-5);

  CHECK(code_of([&] { ops::conv2d(tape, x, Tensor::zeros({4, 2, 3, 3}, DType::kF64), {}, 1, 0); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { ops::conv2d(tape, x, w, {}, 0, 0); }) == ErrorCode::kInvalidHyperparameter);
  CHECK(code_of([&] { ops::conv2d(tape, x, Tensor::zeros({4, 3, 9, 9}, DType::kF64), {}, 1, 0); }) == ErrorCode::kInvalidHyperparameter);
}

TEST_CASE("conv2d matches the direct-loop oracle on small shapes") {
  double worst = 0.0;
  for (unsigned seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    for (std::int64_t n = 1; n <= 4; ++n)
      for (std::int64_t c = 1; c <= 4; ++c)
        for (std::int64_t h = 1; h <= 4; ++h)
          for (std::int64_t k = 1; k <= std::min<std::int64_t>(3, h); ++k)
            for (int stride = 1; stride <= 2; ++stride)
              for (int pad = 0; pad <= (k - 1) / 2; ++pad) {
                auto x = random_tensor(rng, {n, c, h, h}, DType::kF64);
                auto w = random_tensor(rng, {2, c, k, k}, DType::kF64);
                auto b = random_tensor(rng, {2}, DType::kF64);
                Tape tape(false);
                worst = std::max(worst, max_abs_diff(ops::conv2d(tape, x, w, b, stride, pad).data(),
                                                     gdl::testing::conv2d_direct(x, w, b, stride, pad)));
              }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("conv_transpose2d") {
  Tape tape;
  auto y = ops::conv_transpose2d(tape, Tensor::full({1, 1, 1, 1}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), {}, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(values(y) == std::vector<double>(4, 1.0));
  CHECK(ops::conv_transpose_output_size(32, 4, 2, 1) == 64);
  CHECK(ops::conv_transpose_output_size(1, 4, 1, 0) == 4);

  std::mt19937_64 rng(5);
  auto x = random_tensor(rng, {2, 3, 4, 4});
  auto w = random_tensor(rng, {3, 2, 4, 4});
  auto b = random_tensor(rng, {2});
  CHECK(max_abs_diff(ops::conv_transpose2d(tape, x, w, b, 2, 1).data(),
                     gdl::testing::conv_transpose2d_direct(x, w, b, 2, 1)) <= 1e-5);
  CHECK(code_of([&] { ops::conv_transpose2d(tape, Tensor::zeros({1, 1, 1, 1}), Tensor::zeros({1, 1, 2, 2}), {}, 1, 1); }) ==
        ErrorCode::kInvalidHyperparameter);
}

TEST_CASE("conv_transpose2d is the matrix transpose of conv2d") {
  struct Geometry {
    int k, stride, pad;
  };
  std::mt19937_64 rng(17);
  for (auto g : {Geometry{2, 2, 0}, Geometry{3, 1, 1}, Geometry{4, 2, 1}, Geometry{2, 1, 0}}) {
    auto kernel = random_tensor(rng, {1, 1, g.k, g.k}, DType::kF64);
    Tape tape(false);
    const auto out_side = ops::conv_output_size(4, g.k, g.stride, g.pad);
    const auto rows = out_side * out_side;
    // A[r][c]: conv2d response at output r to a unit impulse at input c.
    std::vector<double> forward(static_cast<std::size_t>(rows * 16));
    for (std::int64_t c = 0; c < 16; ++c) {
      auto e = Tensor::zeros({1, 1, 4, 4}, DType::kF64);
      e.mutable_data()[static_cast<std::size_t>(c)] = 1.0;
      auto y = ops::conv2d(tape, e, kernel, {}, g.stride, g.pad);
      for (std::int64_t r = 0; r < rows; ++r) forward[static_cast<std::size_t>(r * 16 + c)] = y.at(r);
    }
    // T[c][r]: conv_transpose2d response at position c to a unit impulse at r.
    double worst = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      auto e = Tensor::zeros({1, 1, out_side, out_side}, DType::kF64);
      e.mutable_data()[static_cast<std::size_t>(r)] = 1.0;
      auto y = ops::conv_transpose2d(tape, e, kernel, {}, g.stride, g.pad);
      REQUIRE(y.shape() == Shape{1, 1, 4, 4});
      for (std::int64_t c = 0; c < 16; ++c) {
        worst = std::max(worst, std::abs(y.at(c) - forward[static_cast<std::size_t>(r * 16 + c)]));
      }
    }
    CHECK(worst == 0.0);
  }
}

TEST_CASE("conv adjoint identity") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t n = 2, c = 3, o = 2;
    auto x = random_tensor(rng, {n, c, 6, 6}, DType::kF64);
    auto w = random_tensor(rng, {o, c, 4, 4}, DType::kF64);
    Tape tape(false);
    auto cx = ops::conv2d(tape, x, w, {}, 2, 1);
    auto y = random_tensor(rng, cx.shape(), DType::kF64);
    auto ty = ops::conv_transpose2d(tape, y, w, {}, 2, 1);
    REQUIRE(ty.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < cx.numel(); ++i) lhs += cx.at(i) * y.at(i);
    for (std::int64_t i = 0; i < x.numel(); ++i) rhs += x.at(i) * ty.at(i);
    CHECK(std::abs(lhs - rhs) <= 1e-6);
  }
}

TEST_CASE("batchnorm2d") {
  Tape tape;
  ops::RunningStats stats{Tensor::zeros({1}, DType::kF64), Tensor::full({1}, 1.0, DType::kF64)};
  auto x = Tensor::from({2, 1, 1, 1}, {1.0, 3.0}, DType::kF64);
  auto gamma = Tensor::full({1}, 1.0, DType::kF64);
  auto beta = Tensor::zeros({1}, DType::kF64);
  auto y = ops::batchnorm2d(tape, x, gamma, beta, 1e-12, ops::Mode::kTrain, stats);
  CHECK(y.at(0) == doctest::Approx(-1.0));
  CHECK(y.at(1) == doctest::Approx(1.0));
  // Running stats: momentum 0.1, unbiased variance (2) folded in.
  CHECK(stats.mean.at(0) == doctest::Approx(0.2));
  CHECK(stats.var.at(0) == doctest::Approx(0.9 + 0.1 * 2.0));

  auto shifted = Tensor::full({1}, 0.5, DType::kF64);
  auto z = ops::batchnorm2d(tape, x, Tensor::zeros({1}, DType::kF64), shifted, 1e-5, ops::Mode::kTrain, stats);
  CHECK(values(z) == std::vector<double>{0.5, 0.5});

  ops::RunningStats fixed{Tensor::full({1}, 1.0, DType::kF64), Tensor::full({1}, 4.0, DType::kF64)};
  auto e = ops::batchnorm2d(tape, x, gamma, beta, 1e-12, ops::Mode::kEval, fixed);
  CHECK(e.at(1) == doctest::Approx(1.0));
  CHECK(fixed.mean.at(0) == 1.0);

  CHECK(code_of([&] {
          ops::batchnorm2d(tape, Tensor::zeros({1, 1, 1, 1}, DType::kF64), gamma, beta, 1e-5, ops::Mode::kTrain, stats);
        }) == ErrorCode::kDegenerateBatch);
}

TEST_CASE("activations") {
  Tape tape;
  CHECK(values(ops::relu(tape, Tensor::from({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(ops::tanh(tape, Tensor::from({1}, {0.0})).item() == 0.0);
  CHECK(ops::leaky_relu(tape, Tensor::from({1}, {-5.0}), 0.2).item() == doctest::Approx(-1.0));
  CHECK(code_of([&] { ops::leaky_relu(tape, Tensor::from({1}, {1.0}), 1.5); }) == ErrorCode::kInvalidHyperparameter);
  CHECK(code_of([&] { ops::leaky_relu(tape, Tensor::from({1}, {1.0}), 0.0); }) == ErrorCode::kInvalidHyperparameter);

  for (DType dtype : {DType::kF32, DType::kF64}) {
    std::mt19937_64 rng(1);
    auto x = random_tensor(rng, {1000}, dtype, -80.0, 80.0);
    x.mutable_data()[0] = 1e6;
    x.mutable_data()[1] = -1e6;
    for (double v : ops::sigmoid(tape, x).data()) CHECK((v > 0.0 && v < 1.0));
    for (double v : ops::tanh(tape, x).data()) CHECK((v >= -1.0 && v <= 1.0));
  }
}

TEST_CASE("losses") {
  Tape tape;
  auto half = Tensor::from({1}, {0.5}, DType::kF64);
  auto one = Tensor::from({1}, {1.0}, DType::kF64);
  CHECK(ops::bce(tape, half, one).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ops::bce(tape, Tensor::from({1}, {1.0 - 1e-7}, DType::kF64), one).item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(ops::bce(tape, Tensor::from({1}, {1.0}, DType::kF64), one).item() < 2e-7);
  CHECK(code_of([&] { ops::bce(tape, half, Tensor::from({1}, {0.5}, DType::kF64)); }) == ErrorCode::kInvalidTarget);
  CHECK(code_of([&] { ops::bce(tape, half, Tensor::from({2}, {1, 0}, DType::kF64)); }) == ErrorCode::kShapeMismatch);

  auto logits = Tensor::from({2, 2}, {0, 0, 0, 0}, DType::kF64);
  std::vector<int> labels{0, 1};
  CHECK(ops::softmax_cross_entropy(tape, logits, labels).item() == doctest::Approx(std::log(2.0)));
  std::vector<int> bad{0, 2};
  CHECK(code_of([&] { ops::softmax_cross_entropy(tape, logits, bad); }) == ErrorCode::kInvalidTarget);
}

TEST_CASE("finite-difference gradient check per op") {
  for (const auto& op : gdl::testing::differentiable_ops()) {
    CAPTURE(op.name);
    std::mt19937_64 rng(1234);
    double worst64 = 0.0, worst32 = 0.0;
    for (int i = 0; i < 10; ++i) {
      auto c = op.make(rng, DType::kF64);
      worst64 = std::max(worst64, check_gradients(c.fn, c.inputs).max_rel_error);
      auto c32 = op.make(rng, DType::kF32);
      worst32 = std::max(worst32, check_gradients(c32.fn, c32.inputs).max_rel_error);
    }
    CHECK(worst64 <= 1e-4);
    CHECK(worst32 <= 1e-2);
  }
}

TEST_CASE("rebuilt tapes give bitwise identical gradients") {
  std::mt19937_64 rng(9);
  auto x = random_tensor(rng, {2, 2, 6, 6}, DType::kF32);
  auto w = random_tensor(rng, {3, 2, 3, 3}, DType::kF32);
  auto run = [&] {
    auto wc = w.clone().set_requires_grad(true);
    Tape tape;
    ops::RunningStats stats{Tensor::zeros({3}), Tensor::full({3}, 1.0)};
    auto y = ops::conv2d(tape, x, wc, {}, 1, 1);
    y = ops::batchnorm2d(tape, y, Tensor::full({3}, 1.0), Tensor::zeros({3}), 1e-5, ops::Mode::kTrain, stats);
    tape.backward(gdl::testing::project(tape, ops::tanh(tape, y)));
    return wc.grad_or_zero();
  };
  CHECK(run() == run());
}
