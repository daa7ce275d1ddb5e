// Copyright 2026 The capsbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "capsbench/ops.hpp"

#include <cmath>

namespace capsbench {
namespace {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

void require_rank(const Shape& shape, Index rank, const char* what) {
  if (Index(shape.size()) != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " + to_string(shape));
  }
}

Index normalize_axis(Index axis, Index rank) {
  Index a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return a;
}

// Splits a shape around `axis` into (outer, length, inner).
struct AxisSplit {
  Index outer = 1, length = 1, inner = 1;
};

AxisSplit split(const Shape& shape, Index axis) {
  AxisSplit s;
  for (Index i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (Index i = axis + 1; i < Index(shape.size()); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, Index axis) {
  Shape out;
  for (Index i = 0; i < Index(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
}

}  // namespace

namespace detail {

template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index height, Index width, Index k, Index stride, Scalar* cols) {
  const Index oh = (height - k) / stride + 1;
  const Index ow = (width - k) / stride + 1;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = image + c * height * width;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        Scalar* row = cols + ((c * k + ki) * k + kj) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          const Scalar* src = plane + (y * stride + ki) * width + kj;
          for (Index x = 0; x < ow; ++x) row[y * ow + x] = src[x * stride];
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, Index k, Index stride, Scalar* image) {
  const Index oh = (height - k) / stride + 1;
  const Index ow = (width - k) / stride + 1;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = image + c * height * width;
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const Scalar* row = cols + ((c * k + ki) * k + kj) * oh * ow;
        for (Index y = 0; y < oh; ++y) {
          Scalar* dst = plane + (y * stride + ki) * width + kj;
          for (Index x = 0; x < ow; ++x) dst[x * stride] += row[y * ow + x];
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias, Index stride) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(kernel.shape(), 4, "conv2d kernel");
  require_rank(bias.shape(), 1, "conv2d bias");
  const Index b = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index o = kernel.dim(0), k = kernel.dim(2);
  if (stride < 1) throw GeometryError("conv2d stride must be positive");
  if (kernel.dim(1) != c) {
    throw GeometryError("conv2d kernel channels " + std::to_string(kernel.dim(1)) + " != input channels " + std::to_string(c));
  }
  if (kernel.dim(3) != k) throw GeometryError("conv2d kernel must be square, got " + to_string(kernel.shape()));
  if (bias.dim(0) != o) throw GeometryError("conv2d bias length " + std::to_string(bias.dim(0)) + " != out channels " + std::to_string(o));
  if (k > h || k > w) {
    throw GeometryError("conv2d kernel " + std::to_string(k) + " larger than input " + std::to_string(h) + "x" + std::to_string(w));
  }
  const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  const Index patch = c * k * k, positions = oh * ow;

  Tensor<Scalar> out({b, o, oh, ow});
  auto weights = kernel.value().matrix(o, patch);
  Eigen::Map<const Vec<Scalar>> bias_vec(bias.value().data(), o);
  RowMatrix<Scalar> cols(patch, positions);
  for (Index n = 0; n < b; ++n) {
    detail::im2col(input.value().data() + n * c * h * w, c, h, w, k, stride, cols.data());
    MatrixMap<Scalar> y(out.data() + n * o * positions, o, positions);
    y.noalias() = weights * cols;
    y.colwise() += bias_vec;
  }

  return record<Scalar>(std::move(out), {input, kernel, bias}, [=](Node<Scalar>& self) {
    auto& x = *self.inputs[0];
    auto& kn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    auto weights = kn.value.matrix(o, patch);
    RowMatrix<Scalar> cols(patch, positions);
    for (Index n = 0; n < b; ++n) {
      ConstMatrixMap<Scalar> gy(self.grad.data() + n * o * positions, o, positions);
      if (kn.requires_grad) {
        detail::im2col(x.value.data() + n * c * h * w, c, h, w, k, stride, cols.data());
        kn.grad_buffer().matrix(o, patch).noalias() += gy * cols.transpose();
      }
      if (bn.requires_grad) bn.grad_buffer().vec() += gy.rowwise().sum();
      if (x.requires_grad) {
        cols.noalias() = weights.transpose() * gy;
        detail::col2im(cols.data(), c, h, w, k, stride, x.grad_buffer().data() + n * c * h * w);
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> deconv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias, Index stride) {
  require_rank(input.shape(), 4, "deconv2d input");
  require_rank(kernel.shape(), 4, "deconv2d kernel");
  require_rank(bias.shape(), 1, "deconv2d bias");
  const Index b = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index o = kernel.dim(1), k = kernel.dim(2);
  if (stride < 1) throw GeometryError("deconv2d stride must be positive");
  if (c == 0 || h == 0 || w == 0) throw GeometryError("deconv2d input has zero extent: " + to_string(input.shape()));
  if (kernel.dim(0) != c) {
    throw GeometryError("deconv2d kernel in-channels " + std::to_string(kernel.dim(0)) + " != input channels " + std::to_string(c));
  }
  if (kernel.dim(3) != k || k < 1) throw GeometryError("deconv2d kernel must be square, got " + to_string(kernel.shape()));
  if (bias.dim(0) != o) throw GeometryError("deconv2d bias length " + std::to_string(bias.dim(0)) + " != out channels " + std::to_string(o));
  const Index oh = (h - 1) * stride + k, ow = (w - 1) * stride + k;
  const Index patch = o * k * k, positions = h * w;

  Tensor<Scalar> out({b, o, oh, ow});
  auto weights = kernel.value().matrix(c, patch);
  RowMatrix<Scalar> cols(patch, positions);
  for (Index n = 0; n < b; ++n) {
    ConstMatrixMap<Scalar> xn(input.value().data() + n * c * positions, c, positions);
    cols.noalias() = weights.transpose() * xn;
    Scalar* dst = out.data() + n * o * oh * ow;
    detail::col2im(cols.data(), o, oh, ow, k, stride, dst);
    for (Index ch = 0; ch < o; ++ch) {
      Eigen::Map<Vec<Scalar>>(dst + ch * oh * ow, oh * ow).array() += bias.value()[ch];
    }
  }

  return record<Scalar>(std::move(out), {input, kernel, bias}, [=](Node<Scalar>& self) {
    auto& x = *self.inputs[0];
    auto& kn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    auto weights = kn.value.matrix(c, patch);
    RowMatrix<Scalar> cols(patch, positions);
    for (Index n = 0; n < b; ++n) {
      const Scalar* gy = self.grad.data() + n * o * oh * ow;
      if (bn.requires_grad) {
        auto& gb = bn.grad_buffer();
        for (Index ch = 0; ch < o; ++ch) gb[ch] += Eigen::Map<const Vec<Scalar>>(gy + ch * oh * ow, oh * ow).sum();
      }
      if (!x.requires_grad && !kn.requires_grad) continue;
      detail::im2col(gy, o, oh, ow, k, stride, cols.data());
      if (x.requires_grad) {
        MatrixMap<Scalar>(x.grad_buffer().data() + n * c * positions, c, positions).noalias() += weights * cols;
      }
      if (kn.requires_grad) {
        ConstMatrixMap<Scalar> xn(x.value.data() + n * c * positions, c, positions);
        kn.grad_buffer().matrix(c, patch).noalias() += xn * cols.transpose();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> fully_connected(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  require_rank(input.shape(), 2, "fully_connected input");
  require_rank(weight.shape(), 2, "fully_connected weight");
  require_rank(bias.shape(), 1, "fully_connected bias");
  const Index b = input.dim(0), n = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != n) {
    throw ShapeError("fully_connected: input width " + std::to_string(n) + " != weight rows " + std::to_string(weight.dim(0)));
  }
  if (bias.dim(0) != m) {
    throw ShapeError("fully_connected: bias length " + std::to_string(bias.dim(0)) + " != outputs " + std::to_string(m));
  }
  Tensor<Scalar> out({b, m});
  auto y = out.matrix(b, m);
  y.noalias() = input.value().matrix(b, n) * weight.value().matrix(n, m);
  y.rowwise() += bias.value().vec().transpose();

  return record<Scalar>(std::move(out), {input, weight, bias}, [=](Node<Scalar>& self) {
    auto& x = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    auto gy = self.grad.matrix(b, m);
    if (x.requires_grad) x.grad_buffer().matrix(b, n).noalias() += gy * wn.value.matrix(n, m).transpose();
    if (wn.requires_grad) wn.grad_buffer().matrix(n, m).noalias() += x.value.matrix(b, n).transpose() * gy;
    if (bn.requires_grad) bn.grad_buffer().vec() += gy.colwise().sum().transpose();
  });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& input, Index axis) {
  const Index ax = normalize_axis(axis, input.rank());
  const AxisSplit s = split(input.shape(), ax);
  Tensor<Scalar> out(input.shape());
  const Scalar* x = input.value().data();
  Scalar* y = out.data();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.length * s.inner + i;
      Scalar peak = x[base];
      for (Index l = 1; l < s.length; ++l) peak = std::max(peak, x[base + l * s.inner]);
      Scalar total = 0;
      for (Index l = 0; l < s.length; ++l) {
        const Scalar e = std::exp(x[base + l * s.inner] - peak);
        y[base + l * s.inner] = e;
        total += e;
      }
      for (Index l = 0; l < s.length; ++l) y[base + l * s.inner] /= total;
    }
  }
  return record<Scalar>(std::move(out), {input}, [s](Node<Scalar>& self) {
    auto& x = *self.inputs[0];
    const Scalar* y = self.value.data();
    const Scalar* gy = self.grad.data();
    Scalar* gx = x.grad_buffer().data();
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.length * s.inner + i;
        Scalar dot = 0;
        for (Index l = 0; l < s.length; ++l) dot += gy[base + l * s.inner] * y[base + l * s.inner];
        for (Index l = 0; l < s.length; ++l) {
          const Index at = base + l * s.inner;
          gx[at] += y[at] * (gy[at] - dot);
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> elementwise(Unary op, const Var<Scalar>& input) {
  const auto x = input.value().vec().array();
  const Scalar eps = Scalar(kNormEpsilon);
  Tensor<Scalar> out(input.shape());
  auto y = out.vec().array();
  switch (op) {
    case Unary::relu: y = x.max(Scalar(0)); break;
    case Unary::sigmoid: y = Scalar(1) / (Scalar(1) + (-x).exp()); break;
    case Unary::square: y = x.square(); break;
    case Unary::sqrt_safe: y = (x + eps).sqrt(); break;
  }
  return record<Scalar>(std::move(out), {input}, [op](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    const auto x = in.value.vec().array();
    const auto y = self.value.vec().array();
    const auto gy = self.grad.vec().array();
    auto gx = in.grad_buffer().vec().array();
    switch (op) {
      case Unary::relu: gx += (x > Scalar(0)).select(gy, Scalar(0)); break;
      case Unary::sigmoid: gx += gy * y * (Scalar(1) - y); break;
      case Unary::square: gx += Scalar(2) * x * gy; break;
      case Unary::sqrt_safe: gx += gy / (Scalar(2) * y); break;
    }
  });
}

template <typename Scalar>
Var<Scalar> reduce(Reduction op, const Var<Scalar>& input, Index axis) {
  const Index ax = normalize_axis(axis, input.rank());
  const AxisSplit s = split(input.shape(), ax);
  Tensor<Scalar> out(drop_axis(input.shape(), ax));
  const Scalar* x = input.value().data();
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.length * s.inner + i;
      Scalar acc = 0;
      for (Index l = 0; l < s.length; ++l) {
        const Scalar v = x[base + l * s.inner];
        acc += op == Reduction::l2_norm ? v * v : v;
      }
      if (op == Reduction::mean) acc /= Scalar(s.length);
      if (op == Reduction::l2_norm) acc = std::sqrt(acc + Scalar(kNormEpsilon));
      out[o * s.inner + i] = acc;
    }
  }
  return record<Scalar>(std::move(out), {input}, [op, s](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    const Scalar* x = in.value.data();
    Scalar* gx = in.grad_buffer().data();
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.length * s.inner + i;
        const Scalar g = self.grad[o * s.inner + i];
        const Scalar y = self.value[o * s.inner + i];
        for (Index l = 0; l < s.length; ++l) {
          const Index at = base + l * s.inner;
          switch (op) {
            case Reduction::sum: gx[at] += g; break;
            case Reduction::mean: gx[at] += g / Scalar(s.length); break;
            case Reduction::l2_norm: gx[at] += g * x[at] / y; break;
          }
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& input) {
  auto out = Tensor<Scalar>::scalar(input.value().vec().sum());
  return record<Scalar>(std::move(out), {input}, [](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    in.grad_buffer().vec().array() += self.grad[0];
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& input, Shape shape) {
  return record<Scalar>(input.value().reshaped(std::move(shape)), {input}, [](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    in.grad_buffer().vec() += self.grad.vec();
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "add");
  Tensor<Scalar> out(a.shape(), a.value().vec() + b.value().vec());
  return record<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->grad_buffer().vec() += self.grad.vec();
    }
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "sub");
  Tensor<Scalar> out(a.shape(), a.value().vec() - b.value().vec());
  return record<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->grad_buffer().vec() += self.grad.vec();
    if (self.inputs[1]->requires_grad) self.inputs[1]->grad_buffer().vec() -= self.grad.vec();
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "mul");
  Tensor<Scalar> out(a.shape(), a.value().vec().cwiseProduct(b.value().vec()));
  return record<Scalar>(std::move(out), {a, b}, [](Node<Scalar>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    // x and y may be the same node; both contributions accumulate
    if (x.requires_grad) x.grad_buffer().vec() += self.grad.vec().cwiseProduct(y.value.vec());
    if (y.requires_grad) y.grad_buffer().vec() += self.grad.vec().cwiseProduct(x.value.vec());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  Tensor<Scalar> out(a.shape(), a.value().vec() * factor);
  return record<Scalar>(std::move(out), {a}, [factor](Node<Scalar>& self) {
    self.inputs[0]->grad_buffer().vec() += self.grad.vec() * factor;
  });
}

#define CAPSBENCH_INSTANTIATE_OPS(S)                                                                  \
  template void detail::im2col<S>(const S*, Index, Index, Index, Index, Index, S*);                   \
  template void detail::col2im<S>(const S*, Index, Index, Index, Index, Index, S*);                   \
  template Var<S> conv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&, Index);                      \
  template Var<S> deconv2d<S>(const Var<S>&, const Var<S>&, const Var<S>&, Index);                    \
  template Var<S> fully_connected<S>(const Var<S>&, const Var<S>&, const Var<S>&);                    \
  template Var<S> softmax<S>(const Var<S>&, Index);                                                   \
  template Var<S> elementwise<S>(Unary, const Var<S>&);                                               \
  template Var<S> reduce<S>(Reduction, const Var<S>&, Index);                                         \
  template Var<S> sum<S>(const Var<S>&);                                                              \
  template Var<S> reshape<S>(const Var<S>&, Shape);                                                   \
  template Var<S> add<S>(const Var<S>&, const Var<S>&);                                               \
  template Var<S> sub<S>(const Var<S>&, const Var<S>&);                                               \
  template Var<S> mul<S>(const Var<S>&, const Var<S>&);                                               \
  template Var<S> scale<S>(const Var<S>&, S);

CAPSBENCH_INSTANTIATE_OPS(float)
CAPSBENCH_INSTANTIATE_OPS(double)

}  // namespace capsbench
