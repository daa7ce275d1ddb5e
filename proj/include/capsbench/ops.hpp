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

#pragma once

#include "capsbench/autograd.hpp"

namespace capsbench {

/// Guard added inside every L2 norm and squash.
inline constexpr double kNormEpsilon = 1e-8;

// Valid (unpadded) cross-correlation. input [b,c,h,w], kernel [o,c,k,k],
// bias [o] -> [b,o,(h-k)/stride+1,(w-k)/stride+1].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias, Index stride);

// Transposed convolution. input [b,c,h,w], kernel [c,o,k,k], bias [o]
// -> [b,o,(h-1)*stride+k,(w-1)*stride+k]. Its input-gradient is conv2d.
template <typename Scalar>
Var<Scalar> deconv2d(const Var<Scalar>& input, const Var<Scalar>& kernel, const Var<Scalar>& bias, Index stride);

// input [b,n] x weight [n,m] + bias [m].
template <typename Scalar>
Var<Scalar> fully_connected(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias);

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& input, Index axis);

enum class Unary { relu, sigmoid, square, sqrt_safe };

template <typename Scalar>
Var<Scalar> elementwise(Unary op, const Var<Scalar>& input);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) { return elementwise(Unary::relu, x); }
template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) { return elementwise(Unary::sigmoid, x); }
template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) { return elementwise(Unary::square, x); }
template <typename Scalar>
Var<Scalar> sqrt_safe(const Var<Scalar>& x) { return elementwise(Unary::sqrt_safe, x); }

enum class Reduction { sum, mean, l2_norm };

// Drops `axis`. l2_norm is sqrt_safe of the sum of squares.
template <typename Scalar>
Var<Scalar> reduce(Reduction op, const Var<Scalar>& input, Index axis);

// Sum of every element, rank-0 result.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& input);

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& input, Shape shape);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor);

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return mul(a, b); }
template <typename Scalar>
Var<Scalar> operator*(Scalar factor, const Var<Scalar>& a) { return scale(a, factor); }

namespace detail {

// Unfolds [channels,h,w] patches into a [channels*k*k, oh*ow] matrix.
template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index height, Index width, Index k, Index stride, Scalar* cols);

// Adjoint of im2col: scatters-adds columns back into the image.
template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, Index k, Index stride, Scalar* image);

}  // namespace detail

}  // namespace capsbench
