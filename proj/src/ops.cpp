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

#include "gdl/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gdl/error.hpp"

namespace gdl::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::size_t to_size(std::int64_t v) { return static_cast<std::size_t>(v); }

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    fail(ErrorCode::kShapeMismatch,
         std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) + " vs " + dtype_name(b.dtype()));
  }
}

void require_rank(const Tensor& t, std::int64_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                        ", got " + shape_str(t.shape()));
  }
}

struct ConvGeometry {
  std::int64_t channels, height, width;  // image being windowed
  std::int64_t kh, kw;
  int stride, padding;
  std::int64_t out_h, out_w;  // window positions
};

// cols[(c*kh + i)*kw + j][oh*out_w + ow] = image[c][oh*s - p + i][ow*s - p + j]
void im2col(const double* image, const ConvGeometry& g, double* cols) {
  const std::int64_t positions = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t y = oh * g.stride - g.padding + i;
          double* dst = row + oh * g.out_w;
          if (y < 0 || y >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = image + (c * g.height + y) * g.width;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t x = ow * g.stride - g.padding + j;
            dst[ow] = (x >= 0 && x < g.width) ? src[x] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
void col2im(const double* cols, const ConvGeometry& g, double* image) {
  const std::int64_t positions = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t y = oh * g.stride - g.padding + i;
          if (y < 0 || y >= g.height) continue;
          double* dst = image + (c * g.height + y) * g.width;
          const double* src = row + oh * g.out_w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t x = ow * g.stride - g.padding + j;
            if (x >= 0 && x < g.width) dst[x] += src[ow];
          }
        }
      }
    }
  }
}

void check_conv_hyper(const char* op, int stride, int padding) {
  if (stride < 1) fail(ErrorCode::kInvalidHyperparameter, std::string(op) + ": stride must be >= 1");
  if (padding < 0) fail(ErrorCode::kInvalidHyperparameter, std::string(op) + ": padding must be >= 0");
}

void check_bias(const Tensor& bias, std::int64_t channels, const Tensor& like, const char* op) {
  if (!bias.defined()) return;
  require_same_dtype(like, bias, op);
  if (bias.rank() != 1 || bias.dim(0) != channels) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": bias shape " + shape_str(bias.shape()) + " expected (" +
                                        std::to_string(channels) + ")");
  }
}

}  // namespace

std::int64_t conv_output_size(std::int64_t in, std::int64_t kernel, int stride, int padding) {
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

std::int64_t conv_transpose_output_size(std::int64_t in, std::int64_t kernel, int stride, int padding) {
  return (in - 1) * stride - 2 * padding + kernel;
}

Tensor elementwise(Tape& tape, Elementwise kind, const Tensor& a, const Tensor& b) {
  const auto& av = a.data();
  const bool unary = kind == Elementwise::kNeg || kind == Elementwise::kLog || kind == Elementwise::kExp;
  if (unary) {
    std::vector<double> out(av.size());
    switch (kind) {
      case Elementwise::kNeg:
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = -av[i];
        return tape.record("neg", {a}, a.shape(), std::move(out), a.dtype(),
                           [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] -= g[i];
                           });
      case Elementwise::kLog:
        for (std::size_t i = 0; i < av.size(); ++i) {
          if (!(av[i] > 0.0)) fail(ErrorCode::kDomainError, "log of non-positive value " + std::to_string(av[i]));
          out[i] = std::log(av[i]);
        }
        return tape.record("log", {a}, a.shape(), std::move(out), a.dtype(),
                           [a](std::span<const double> g, std::span<std::vector<double>*> gin) {
                             const auto x = a.data();
                             for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] / x[i];
                           });
      default: {
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::exp(av[i]);
        auto result = tape.record("exp", {a}, a.shape(), out, a.dtype(),
                                  [out](std::span<const double> g, std::span<std::vector<double>*> gin) {
                                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * out[i];
                                  });
        return result;
      }
    }
  }

  if (!b.defined()) fail(ErrorCode::kShapeMismatch, "binary elementwise op needs two operands");
  require_same_dtype(a, b, "elementwise");
  const auto& bv = b.data();
  Shape shape;
  if (a.shape() == b.shape()) {
    shape = a.shape();
  } else if (bv.size() == 1) {
    shape = a.shape();
  } else if (av.size() == 1) {
    shape = b.shape();
  } else {
    fail(ErrorCode::kShapeMismatch, "elementwise shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = std::max(av.size(), bv.size());
  const bool a_scalar = av.size() == 1 && n > 1;
  const bool b_scalar = bv.size() == 1 && n > 1;
  auto ai = [&](std::size_t i) { return av[a_scalar ? 0 : i]; };
  auto bi = [&](std::size_t i) { return bv[b_scalar ? 0 : i]; };

  std::vector<double> out(n);
  const char* name = "add";
  switch (kind) {
    case Elementwise::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) + bi(i);
      break;
    case Elementwise::kSub:
      name = "sub";
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) - bi(i);
      break;
    default:
      name = "mul";
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) * bi(i);
      break;
  }
  return tape.record(name, {a, b}, std::move(shape), std::move(out), a.dtype(),
                     [kind, a, b, a_scalar, b_scalar](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       const auto x = a.data();
                       const auto y = b.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const std::size_t ia = a_scalar ? 0 : i;
                         const std::size_t ib = b_scalar ? 0 : i;
                         double da = g[i], db = g[i];
                         if (kind == Elementwise::kSub) db = -g[i];
                         if (kind == Elementwise::kMul) {
                           da = g[i] * y[ib];
                           db = g[i] * x[ia];
                         }
                         if (gin[0]) (*gin[0])[ia] += da;
                         if (gin[1]) (*gin[1])[ib] += db;
                       }
                     });
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul", "lhs");
  require_rank(b, 2, "matmul", "rhs");
  require_same_dtype(a, b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    fail(ErrorCode::kShapeMismatch, "matmul inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(to_size(m * n));
  MatrixMap(out.data(), m, n).noalias() = ConstMatrixMap(a.data().data(), m, k) * ConstMatrixMap(b.data().data(), k, n);
  return tape.record("matmul", {a, b}, {m, n}, std::move(out), a.dtype(),
                     [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       ConstMatrixMap dc(g.data(), m, n);
                       if (gin[0]) {
                         MatrixMap(gin[0]->data(), m, k).noalias() += dc * ConstMatrixMap(b.data().data(), k, n).transpose();
                       }
                       if (gin[1]) {
                         MatrixMap(gin[1]->data(), k, n).noalias() += ConstMatrixMap(a.data().data(), m, k).transpose() * dc;
                       }
                     });
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require_same_dtype(input, weight, "conv2d");
  check_conv_hyper("conv2d", stride, padding);
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c) {
    fail(ErrorCode::kShapeMismatch,
         "conv2d: input " + shape_str(input.shape()) + " incompatible with weight " + shape_str(weight.shape()));
  }
  check_bias(bias, o, input, "conv2d");
  ConvGeometry geo{c, h, w, kh, kw, stride, padding, conv_output_size(h, kh, stride, padding),
                   conv_output_size(w, kw, stride, padding)};
  if (geo.out_h < 1 || geo.out_w < 1) {
    fail(ErrorCode::kInvalidHyperparameter, "conv2d: output size would be < 1 for input " + shape_str(input.shape()));
  }
  const auto positions = geo.out_h * geo.out_w;
  const auto patch = c * kh * kw;

  std::vector<double> out(to_size(n * o * positions));
  std::vector<double> cols(to_size(patch * positions));
  ConstMatrixMap wm(weight.data().data(), o, patch);
  const double* x = input.data().data();
  for (std::int64_t img = 0; img < n; ++img) {
    im2col(x + img * c * h * w, geo, cols.data());
    MatrixMap y(out.data() + img * o * positions, o, positions);
    y.noalias() = wm * ConstMatrixMap(cols.data(), patch, positions);
    if (bias.defined()) {
      const auto bv = bias.data();
      for (std::int64_t ch = 0; ch < o; ++ch) y.row(ch).array() += bv[to_size(ch)];
    }
  }

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return tape.record(
      "conv2d", std::move(inputs), {n, o, geo.out_h, geo.out_w}, std::move(out), input.dtype(),
      [input, weight, geo, n, o, patch, positions](std::span<const double> g, std::span<std::vector<double>*> gin) {
        const auto image_size = geo.channels * geo.height * geo.width;
        std::vector<double> cols(to_size(patch * positions));
        std::vector<double> dcols(to_size(patch * positions));
        ConstMatrixMap wm(weight.data().data(), o, patch);
        for (std::int64_t img = 0; img < n; ++img) {
          ConstMatrixMap dy(g.data() + img * o * positions, o, positions);
          if (gin[1]) {
            im2col(input.data().data() + img * image_size, geo, cols.data());
            MatrixMap(gin[1]->data(), o, patch).noalias() += dy * ConstMatrixMap(cols.data(), patch, positions).transpose();
          }
          if (gin[0]) {
            MatrixMap(dcols.data(), patch, positions).noalias() = wm.transpose() * dy;
            col2im(dcols.data(), geo, gin[0]->data() + img * image_size);
          }
          if (gin.size() > 2 && gin[2]) {
            for (std::int64_t ch = 0; ch < o; ++ch) (*gin[2])[to_size(ch)] += dy.row(ch).sum();
          }
        }
      });
}

Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
                        int padding) {
  require_rank(input, 4, "conv_transpose2d", "input");
  require_rank(weight, 4, "conv_transpose2d", "weight");
  require_same_dtype(input, weight, "conv_transpose2d");
  check_conv_hyper("conv_transpose2d", stride, padding);
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto o = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(0) != c) {
    fail(ErrorCode::kShapeMismatch, "conv_transpose2d: input " + shape_str(input.shape()) +
                                        " incompatible with weight " + shape_str(weight.shape()));
  }
  check_bias(bias, o, input, "conv_transpose2d");
  const auto out_h = conv_transpose_output_size(h, kh, stride, padding);
  const auto out_w = conv_transpose_output_size(w, kw, stride, padding);
  if (out_h < 1 || out_w < 1) {
    fail(ErrorCode::kInvalidHyperparameter,
         "conv_transpose2d: output size would be < 1 for input " + shape_str(input.shape()));
  }
  // Geometry of the equivalent forward convolution that maps the output back onto the input grid.
  ConvGeometry geo{o, out_h, out_w, kh, kw, stride, padding, h, w};
  const auto positions = h * w;
  const auto patch = o * kh * kw;

  std::vector<double> out(to_size(n * o * out_h * out_w), 0.0);
  std::vector<double> cols(to_size(patch * positions));
  ConstMatrixMap wm(weight.data().data(), c, patch);
  const double* x = input.data().data();
  for (std::int64_t img = 0; img < n; ++img) {
    MatrixMap(cols.data(), patch, positions).noalias() = wm.transpose() * ConstMatrixMap(x + img * c * positions, c, positions);
    double* y = out.data() + img * o * out_h * out_w;
    col2im(cols.data(), geo, y);
    if (bias.defined()) {
      const auto bv = bias.data();
      for (std::int64_t ch = 0; ch < o; ++ch) {
        for (std::int64_t k = 0; k < out_h * out_w; ++k) y[ch * out_h * out_w + k] += bv[to_size(ch)];
      }
    }
  }

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return tape.record(
      "conv_transpose2d", std::move(inputs), {n, o, out_h, out_w}, std::move(out), input.dtype(),
      [input, weight, geo, n, c, o, patch, positions](std::span<const double> g, std::span<std::vector<double>*> gin) {
        const auto out_size = geo.height * geo.width;
        std::vector<double> cols(to_size(patch * positions));
        ConstMatrixMap wm(weight.data().data(), c, patch);
        for (std::int64_t img = 0; img < n; ++img) {
          const double* dy = g.data() + img * o * out_size;
          im2col(dy, geo, cols.data());
          ConstMatrixMap dcols(cols.data(), patch, positions);
          if (gin[0]) MatrixMap(gin[0]->data() + img * c * positions, c, positions).noalias() += wm * dcols;
          if (gin[1]) {
            ConstMatrixMap xm(input.data().data() + img * c * positions, c, positions);
            MatrixMap(gin[1]->data(), c, patch).noalias() += xm * dcols.transpose();
          }
          if (gin.size() > 2 && gin[2]) {
            for (std::int64_t ch = 0; ch < o; ++ch) {
              double s = 0.0;
              for (std::int64_t k = 0; k < out_size; ++k) s += dy[ch * out_size + k];
              (*gin[2])[to_size(ch)] += s;
            }
          }
        }
      });
}

Tensor batchnorm2d(Tape& tape, const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps, Mode mode,
                   RunningStats& stats) {
  require_rank(input, 4, "batchnorm2d", "input");
  require_same_dtype(input, gamma, "batchnorm2d");
  require_same_dtype(input, beta, "batchnorm2d");
  const auto n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &stats.mean, &stats.var}) {
    if (!t->defined() || t->rank() != 1 || t->dim(0) != c) {
      fail(ErrorCode::kShapeMismatch, "batchnorm2d: per-channel tensors must have shape (" + std::to_string(c) + ")");
    }
  }
  if (!(eps > 0.0)) fail(ErrorCode::kInvalidHyperparameter, "batchnorm2d: eps must be positive");
  const auto count = n * hw;
  if (mode == Mode::kTrain && count < 2) {
    fail(ErrorCode::kDegenerateBatch, "batchnorm2d: train mode needs at least 2 values per channel");
  }

  const auto x = input.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<double> mean(to_size(c)), inv_std(to_size(c));
  if (mode == Mode::kTrain) {
    auto rm = stats.mean.mutable_data();
    auto rv = stats.var.mutable_data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::int64_t img = 0; img < n; ++img) {
        const double* p = x.data() + (img * c + ch) * hw;
        for (std::int64_t k = 0; k < hw; ++k) s += p[k];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t img = 0; img < n; ++img) {
        const double* p = x.data() + (img * c + ch) * hw;
        for (std::int64_t k = 0; k < hw; ++k) ss += (p[k] - mu) * (p[k] - mu);
      }
      const double var = ss / static_cast<double>(count);
      mean[to_size(ch)] = mu;
      inv_std[to_size(ch)] = 1.0 / std::sqrt(var + eps);
      const double unbiased = ss / static_cast<double>(count - 1);
      rm[to_size(ch)] = round_to(stats.mean.dtype(), (1.0 - stats.momentum) * rm[to_size(ch)] + stats.momentum * mu);
      rv[to_size(ch)] = round_to(stats.var.dtype(), (1.0 - stats.momentum) * rv[to_size(ch)] + stats.momentum * unbiased);
    }
  } else {
    const auto rm = stats.mean.data();
    const auto rv = stats.var.data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      mean[to_size(ch)] = rm[to_size(ch)];
      inv_std[to_size(ch)] = 1.0 / std::sqrt(rv[to_size(ch)] + eps);
    }
  }

  std::vector<double> xhat(x.size());
  std::vector<double> out(x.size());
  for (std::int64_t img = 0; img < n; ++img) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto base = to_size((img * c + ch) * hw);
      for (std::int64_t k = 0; k < hw; ++k) {
        const double xh = (x[base + to_size(k)] - mean[to_size(ch)]) * inv_std[to_size(ch)];
        xhat[base + to_size(k)] = xh;
        out[base + to_size(k)] = gv[to_size(ch)] * xh + bv[to_size(ch)];
      }
    }
  }

  return tape.record(
      "batchnorm2d", {input, gamma, beta}, input.shape(), std::move(out), input.dtype(),
      [gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw, mode](
          std::span<const double> g, std::span<std::vector<double>*> gin) {
        const auto gv = gamma.data();
        const double m = static_cast<double>(n * hw);
        for (std::int64_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::int64_t img = 0; img < n; ++img) {
            const auto base = to_size((img * c + ch) * hw);
            for (std::int64_t k = 0; k < hw; ++k) {
              sum_g += g[base + to_size(k)];
              sum_gx += g[base + to_size(k)] * xhat[base + to_size(k)];
            }
          }
          if (gin[1]) (*gin[1])[to_size(ch)] += sum_gx;
          if (gin[2]) (*gin[2])[to_size(ch)] += sum_g;
          if (!gin[0]) continue;
          const double scale = gv[to_size(ch)] * inv_std[to_size(ch)];
          for (std::int64_t img = 0; img < n; ++img) {
            const auto base = to_size((img * c + ch) * hw);
            for (std::int64_t k = 0; k < hw; ++k) {
              const auto i = base + to_size(k);
              if (mode == Mode::kTrain) {
                (*gin[0])[i] += scale * (g[i] - sum_g / m - xhat[i] * sum_gx / m);
              } else {
                (*gin[0])[i] += scale * g[i];
              }
            }
          }
        }
      });
}

Tensor activation(Tape& tape, Activation kind, const Tensor& input, double alpha) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      return tape.record("relu", {input}, input.shape(), std::move(out), input.dtype(),
                         [input](std::span<const double> g, std::span<std::vector<double>*> gin) {
                           const auto x = input.data();
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += x[i] > 0.0 ? g[i] : 0.0;
                         });
    case Activation::kLeakyRelu:
      if (!(alpha > 0.0 && alpha < 1.0)) {
        fail(ErrorCode::kInvalidHyperparameter, "leaky_relu alpha must lie in (0, 1), got " + std::to_string(alpha));
      }
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : alpha * x[i];
      return tape.record("leaky_relu", {input}, input.shape(), std::move(out), input.dtype(),
                         [input, alpha](std::span<const double> g, std::span<std::vector<double>*> gin) {
                           const auto x = input.data();
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += x[i] > 0.0 ? g[i] : alpha * g[i];
                         });
    case Activation::kTanh: {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = round_to(input.dtype(), std::tanh(x[i]));
      auto y = out;
      return tape.record("tanh", {input}, input.shape(), std::move(out), input.dtype(),
                         [y = std::move(y)](std::span<const double> g, std::span<std::vector<double>*> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * (1.0 - y[i] * y[i]);
                         });
    }
    case Activation::kSigmoid: {
      // Keep the result strictly inside (0, 1) after rounding to the storage type.
      const bool f32 = input.dtype() == DType::kF32;
      const double lo = f32 ? std::numeric_limits<float>::min() : std::numeric_limits<double>::min();
      const double hi = f32 ? static_cast<double>(std::nextafter(1.0f, 0.0f)) : std::nextafter(1.0, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
        out[i] = std::clamp(round_to(input.dtype(), s), lo, hi);
      }
      auto y = out;
      return tape.record("sigmoid", {input}, input.shape(), std::move(out), input.dtype(),
                         [y = std::move(y)](std::span<const double> g, std::span<std::vector<double>*> gin) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i] * (1.0 - y[i]);
                         });
    }
  }
  fail(ErrorCode::kInvalidHyperparameter, "unknown activation");
}

Tensor bce(Tape& tape, const Tensor& prediction, const Tensor& target) {
  require_same_dtype(prediction, target, "bce");
  if (prediction.numel() != target.numel()) {
    fail(ErrorCode::kShapeMismatch,
         "bce: prediction " + shape_str(prediction.shape()) + " vs target " + shape_str(target.shape()));
  }
  if (prediction.numel() == 0) fail(ErrorCode::kEmptyBatch, "bce on an empty batch");
  const auto p = prediction.data();
  const auto y = target.data();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) fail(ErrorCode::kInvalidTarget, "bce targets must be 0 or 1");
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) fail(ErrorCode::kDomainError, "bce prediction outside [0, 1]");
    const double pc = std::clamp(p[i], kBceEpsilon, 1.0 - kBceEpsilon);
    total -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return tape.record("bce", {prediction, target}, {}, {total / n}, prediction.dtype(),
                     [prediction, target, n](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       if (!gin[0]) return;
                       const auto p = prediction.data();
                       const auto y = target.data();
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         const double pc = std::clamp(p[i], kBceEpsilon, 1.0 - kBceEpsilon);
                         (*gin[0])[i] += g[0] * (pc - y[i]) / (pc * (1.0 - pc)) / n;
                       }
                     });
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const auto rows = logits.dim(0), classes = logits.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != rows) {
    fail(ErrorCode::kShapeMismatch, "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                        std::to_string(rows) + " rows");
  }
  const auto z = logits.data();
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    const int t = targets[to_size(r)];
    if (t < 0 || t >= classes) fail(ErrorCode::kInvalidTarget, "class index " + std::to_string(t) + " out of range");
    const double* row = z.data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double s = 0.0;
    for (std::int64_t k = 0; k < classes; ++k) s += std::exp(row[k] - mx);
    for (std::int64_t k = 0; k < classes; ++k) probs[to_size(r * classes + k)] = std::exp(row[k] - mx) / s;
    total -= row[t] - mx - std::log(s);
  }
  std::vector<int> labels(targets.begin(), targets.end());
  const double n = static_cast<double>(rows);
  return tape.record("softmax_cross_entropy", {logits}, {}, {total / n}, logits.dtype(),
                     [probs = std::move(probs), labels = std::move(labels), classes, n](
                         std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (std::size_t r = 0; r < labels.size(); ++r) {
                         for (std::int64_t k = 0; k < classes; ++k) {
                           const auto i = r * to_size(classes) + to_size(k);
                           const double onehot = k == labels[r] ? 1.0 : 0.0;
                           (*gin[0])[i] += g[0] * (probs[i] - onehot) / n;
                         }
                       }
                     });
}

Tensor bias_add(Tape& tape, const Tensor& input, const Tensor& bias) {
  if (input.rank() != 2 && input.rank() != 4) {
    fail(ErrorCode::kShapeMismatch, "bias_add expects rank 2 or 4, got " + shape_str(input.shape()));
  }
  const auto n = input.dim(0), c = input.dim(1);
  const auto inner = input.numel() / (n * c);
  check_bias(bias, c, input, "bias_add");
  const auto x = input.data();
  const auto b = bias.data();
  std::vector<double> out(x.begin(), x.end());
  for (std::int64_t img = 0; img < n; ++img) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (std::int64_t k = 0; k < inner; ++k) out[to_size((img * c + ch) * inner + k)] += b[to_size(ch)];
    }
  }
  return tape.record("bias_add", {input, bias}, input.shape(), std::move(out), input.dtype(),
                     [n, c, inner](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       if (gin[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                       }
                       if (gin[1]) {
                         for (std::int64_t img = 0; img < n; ++img) {
                           for (std::int64_t ch = 0; ch < c; ++ch) {
                             for (std::int64_t k = 0; k < inner; ++k) {
                               (*gin[1])[to_size(ch)] += g[to_size((img * c + ch) * inner + k)];
                             }
                           }
                         }
                       }
                     });
}

Tensor reshape(Tape& tape, const Tensor& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    fail(ErrorCode::kShapeMismatch, "reshape " + shape_str(input.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(input.data().begin(), input.data().end());
  return tape.record("reshape", {input}, std::move(shape), std::move(out), input.dtype(),
                     [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                     });
}

Tensor flatten(Tape& tape, const Tensor& input) {
  if (input.rank() < 1) fail(ErrorCode::kShapeMismatch, "flatten of a scalar");
  return reshape(tape, input, {input.dim(0), input.numel() / input.dim(0)});
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> inputs) {
  if (inputs.empty()) fail(ErrorCode::kShapeMismatch, "concat of zero tensors");
  const Tensor& first = inputs.front();
  require_rank(first, 4, "concat_channels", "input");
  const auto n = first.dim(0), hw = first.dim(2) * first.dim(3);
  std::int64_t channels = 0;
  std::vector<std::int64_t> offsets;
  for (const auto& t : inputs) {
    require_rank(t, 4, "concat_channels", "input");
    require_same_dtype(first, t, "concat_channels");
    if (t.dim(0) != n || t.dim(2) != first.dim(2) || t.dim(3) != first.dim(3)) {
      fail(ErrorCode::kShapeMismatch, "concat_channels: " + shape_str(t.shape()) + " vs " + shape_str(first.shape()));
    }
    offsets.push_back(channels);
    channels += t.dim(1);
  }
  std::vector<double> out(to_size(n * channels * hw));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto x = inputs[k].data();
    const auto ck = inputs[k].dim(1);
    for (std::int64_t img = 0; img < n; ++img) {
      std::copy_n(x.data() + img * ck * hw, ck * hw, out.data() + (img * channels + offsets[k]) * hw);
    }
  }
  std::vector<std::int64_t> widths;
  for (const auto& t : inputs) widths.push_back(t.dim(1));
  return tape.record("concat_channels", std::vector<Tensor>(inputs.begin(), inputs.end()),
                     {n, channels, first.dim(2), first.dim(3)}, std::move(out), first.dtype(),
                     [offsets, widths, n, channels, hw](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (!gin[k]) continue;
                         for (std::int64_t img = 0; img < n; ++img) {
                           const double* src = g.data() + (img * channels + offsets[k]) * hw;
                           double* dst = gin[k]->data() + img * widths[k] * hw;
                           for (std::int64_t i = 0; i < widths[k] * hw; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor max_pool2d(Tape& tape, const Tensor& input, int kernel, int stride, int padding) {
  require_rank(input, 4, "max_pool2d", "input");
  if (kernel < 1) fail(ErrorCode::kInvalidHyperparameter, "max_pool2d: kernel must be >= 1");
  check_conv_hyper("max_pool2d", stride, padding);
  if (2 * padding > kernel) fail(ErrorCode::kInvalidHyperparameter, "max_pool2d: padding too large");
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto oh = conv_output_size(h, kernel, stride, padding);
  const auto ow = conv_output_size(w, kernel, stride, padding);
  if (oh < 1 || ow < 1) fail(ErrorCode::kInvalidHyperparameter, "max_pool2d: output size would be < 1");
  const auto x = input.data();
  std::vector<double> out(to_size(n * c * oh * ow));
  std::vector<std::int64_t> argmax(out.size());
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t where = -1;
        for (int di = 0; di < kernel; ++di) {
          const auto y = i * stride - padding + di;
          if (y < 0 || y >= h) continue;
          for (int dj = 0; dj < kernel; ++dj) {
            const auto xx = j * stride - padding + dj;
            if (xx < 0 || xx >= w) continue;
            const auto idx = (plane * h + y) * w + xx;
            if (x[to_size(idx)] > best) {
              best = x[to_size(idx)];
              where = idx;
            }
          }
        }
        const auto o = to_size((plane * oh + i) * ow + j);
        out[o] = best;
        argmax[o] = where;
      }
    }
  }
  return tape.record("max_pool2d", {input}, {n, c, oh, ow}, std::move(out), input.dtype(),
                     [argmax = std::move(argmax)](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[to_size(argmax[i])] += g[i];
                     });
}

Tensor global_avg_pool(Tape& tape, const Tensor& input) {
  require_rank(input, 4, "global_avg_pool", "input");
  const auto n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  const auto x = input.data();
  std::vector<double> out(to_size(n * c));
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    double s = 0.0;
    for (std::int64_t k = 0; k < hw; ++k) s += x[to_size(plane * hw + k)];
    out[to_size(plane)] = s / static_cast<double>(hw);
  }
  return tape.record("global_avg_pool", {input}, {n, c}, std::move(out), input.dtype(),
                     [hw](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (std::size_t plane = 0; plane < g.size(); ++plane) {
                         for (std::int64_t k = 0; k < hw; ++k) {
                           (*gin[0])[plane * to_size(hw) + to_size(k)] += g[plane] / static_cast<double>(hw);
                         }
                       }
                     });
}

Tensor sum(Tape& tape, const Tensor& input) {
  double s = 0.0;
  for (double v : input.data()) s += v;
  return tape.record("sum", {input}, {}, {s}, input.dtype(),
                     [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (auto& v : *gin[0]) v += g[0];
                     });
}

Tensor mean(Tape& tape, const Tensor& input) {
  if (input.numel() == 0) fail(ErrorCode::kEmptyBatch, "mean of an empty tensor");
  double s = 0.0;
  for (double v : input.data()) s += v;
  const double n = static_cast<double>(input.numel());
  return tape.record("mean", {input}, {}, {s / n}, input.dtype(),
                     [n](std::span<const double> g, std::span<std::vector<double>*> gin) {
                       for (auto& v : *gin[0]) v += g[0] / n;
                     });
}

}  // namespace gdl::ops
