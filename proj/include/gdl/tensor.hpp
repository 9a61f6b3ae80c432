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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gdl {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
const char* dtype_name(DType dtype);

class Tape;
struct TensorImpl;

/// Dense row-major array with an optional gradient.
///
/// Tensor is a shared handle: copies alias the same storage, which is what
/// lets a parameter receive its gradient after a backward pass. Use clone()
/// for an independent copy. Values are held in double precision; f32 tensors
/// round every stored value to the nearest float.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::kF32);
  static Tensor full(Shape shape, double value, DType dtype = DType::kF32);
  static Tensor from(Shape shape, std::vector<double> values, DType dtype = DType::kF32);
  static Tensor scalar(double value, DType dtype = DType::kF32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t rank() const { return static_cast<std::int64_t>(shape().size()); }
  std::int64_t dim(std::size_t axis) const { return shape().at(axis); }
  std::int64_t numel() const;
  DType dtype() const;

  std::span<const double> data() const;
  // Writes are only legal on tensors that are not referenced by a live tape.
  std::span<double> mutable_data();
  double item() const;
  double at(std::int64_t flat_index) const { return data()[static_cast<std::size_t>(flat_index)]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::vector<double> grad_or_zero() const;
  void clear_grad();

  Tensor clone() const;
  // Same values, no gradient history, requires_grad = false.
  Tensor detach() const;

  const TensorImpl* id() const { return impl_.get(); }

 private:
  friend class Tape;
  friend Tensor make_output(Shape, std::vector<double>, DType);
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  Shape shape;
  DType dtype = DType::kF32;
  std::vector<double> data;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<double> grad;
  std::uint64_t tape_id = 0;  // 0: leaf
  std::size_t node = 0;
};

double round_to(DType dtype, double value);

/// Records differentiable operations in execution order.
///
/// Nodes are appended as ops run, so inputs always precede their consumers.
/// One tape belongs to one thread and one forward/backward cycle. A tape
/// constructed with recording disabled runs ops as pure forward evaluation.
class Tape {
 public:
  // Adds the node's contribution to each input gradient. Entries of `input_grads`
  // are null for inputs that do not require a gradient.
  using BackwardFn =
      std::function<void(std::span<const double> output_grad, std::span<std::vector<double>*> input_grads)>;

  explicit Tape(bool recording = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  // Finalizes an op output: rounds to dtype, rejects non-finite values, and
  // records the node when any input requires a gradient.
  Tensor record(std::string_view op, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                DType dtype, BackwardFn backward);

  // Propagates d(loss)/d(.) to every reachable leaf with requires_grad,
  // accumulating into existing gradients.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::string_view op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };

  std::uint64_t id_;
  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace gdl
