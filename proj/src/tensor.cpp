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

#include "gdl/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "gdl/error.hpp"

namespace gdl {

namespace {

std::atomic<std::uint64_t> next_tape_id{1};

const TensorImpl& checked(const std::shared_ptr<TensorImpl>& impl) {
  if (!impl) fail(ErrorCode::kShapeMismatch, "use of an undefined tensor");
  return *impl;
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

const char* dtype_name(DType dtype) { return dtype == DType::kF32 ? "f32" : "f64"; }

double round_to(DType dtype, double value) {
  return dtype == DType::kF32 ? static_cast<double>(static_cast<float>(value)) : value;
}

Tensor make_output(Shape shape, std::vector<double> values, DType dtype) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, DType dtype) {
  for (auto d : shape) {
    if (d <= 0) fail(ErrorCode::kShapeMismatch, "non-positive dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    fail(ErrorCode::kShapeMismatch, "shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                                        " values");
  }
  for (auto& v : values) v = round_to(dtype, v);
  return make_output(std::move(shape), std::move(values), dtype);
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), dtype);
}

Tensor Tensor::scalar(double value, DType dtype) { return from({}, {value}, dtype); }

const Shape& Tensor::shape() const { return checked(impl_).shape; }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(checked(impl_).data.size()); }
DType Tensor::dtype() const { return checked(impl_).dtype; }
std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  checked(impl_);
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return checked(impl_).has_grad; }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) fail(ErrorCode::kMissingGradient, "tensor has no gradient");
  return impl_->grad;
}

std::vector<double> Tensor::grad_or_zero() const {
  if (has_grad()) return impl_->grad;
  return std::vector<double>(static_cast<std::size_t>(numel()), 0.0);
}

void Tensor::clear_grad() {
  checked(impl_);
  impl_->has_grad = false;
  impl_->grad.clear();
}

Tensor Tensor::clone() const {
  const auto& src = checked(impl_);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = src.shape;
  impl->dtype = src.dtype;
  impl->data = src.data;
  impl->requires_grad = src.requires_grad && src.tape_id == 0;
  impl->has_grad = src.has_grad;
  impl->grad = src.grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  const auto& src = checked(impl_);
  return make_output(src.shape, src.data, src.dtype);
}

Tape::Tape(bool recording) : id_(next_tape_id.fetch_add(1)), recording_(recording) {}

Tensor Tape::record(std::string_view op, std::vector<Tensor> inputs, Shape shape, std::vector<double> values,
                    DType dtype, BackwardFn backward) {
  for (auto& v : values) {
    v = round_to(dtype, v);
    if (!std::isfinite(v)) fail(ErrorCode::kOverflow, std::string(op) + " produced a non-finite value");
  }
  Tensor out = make_output(std::move(shape), std::move(values), dtype);
  if (!recording_) return out;

  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;

  Node node;
  node.op = op;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.impl_);
  node.output = out.impl_;
  node.backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->tape_id = id_;
  out.impl_->node = nodes_.size();
  nodes_.push_back(std::move(node));
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) fail(ErrorCode::kDetachedTensor, "backward on an undefined tensor");
  const auto& root = *loss.impl_;
  if (root.tape_id != id_ || root.node >= nodes_.size() || nodes_[root.node].output.get() != &root) {
    fail(ErrorCode::kDetachedTensor, "loss was not recorded on this tape");
  }
  if (root.data.size() != 1) fail(ErrorCode::kShapeMismatch, "backward requires a scalar loss");

  std::unordered_map<const TensorImpl*, std::vector<double>> grads;
  grads[&root] = {1.0};
  std::vector<TensorImpl*> leaves;

  for (std::size_t i = root.node + 1; i-- > 0;) {
    Node& node = nodes_[i];
    auto it = grads.find(node.output.get());
    if (it == grads.end()) continue;
    std::vector<double> output_grad = std::move(it->second);
    grads.erase(it);

    std::vector<std::vector<double>*> input_grads(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      TensorImpl* in = node.inputs[k].get();
      if (!in->requires_grad) continue;
      auto [slot, inserted] = grads.try_emplace(in);
      if (inserted) {
        slot->second.assign(in->data.size(), 0.0);
        bool on_this_tape = in->tape_id == id_ && in->node < nodes_.size() && nodes_[in->node].output.get() == in;
        if (!on_this_tape) leaves.push_back(in);
      }
      input_grads[k] = &slot->second;
    }
    node.backward(output_grad, input_grads);
  }

  for (TensorImpl* leaf : leaves) {
    auto& g = grads[leaf];
    if (!leaf->has_grad) {
      leaf->grad.assign(g.size(), 0.0);
      leaf->has_grad = true;
    }
    for (std::size_t k = 0; k < g.size(); ++k) leaf->grad[k] = round_to(leaf->dtype, leaf->grad[k] + g[k]);
  }
}

}  // namespace gdl
