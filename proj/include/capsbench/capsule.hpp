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

#include <vector>

#include "capsbench/ops.hpp"

namespace capsbench {

inline constexpr Index kPrimaryCapsuleDim = 8;
inline constexpr Index kDigitCapsuleDim = 16;
inline constexpr Index kPrimaryKernel = 9;
inline constexpr Index kPrimaryStride = 2;

// A capsule pack is a Var of shape [batch, num_capsules, capsule_dim].

/// v = (|s|^2 / (1 + |s|^2)) * s / |s| along the last axis, with the norm
/// guarded by kNormEpsilon.
template <typename Scalar>
Var<Scalar> squash(const Var<Scalar>& capsules);

/// Affine transform stage: u [b,N,in] and W [N,M,in,out] give the
/// predictions u_hat[b,i,j] = W[i,j]^T u[b,i], shape [b,N,M,out].
template <typename Scalar>
Var<Scalar> predict(const Var<Scalar>& capsules, const Var<Scalar>& transforms);

// s[b,j] = sum_i c[b,i,j] * u_hat[b,i,j]; c [b,N,M], u_hat [b,N,M,d] -> [b,M,d].
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& couplings, const Var<Scalar>& predictions);

// a[b,i,j] = <u_hat[b,i,j], v[b,j]>; u_hat [b,N,M,d], v [b,M,d] -> [b,N,M].
template <typename Scalar>
Var<Scalar> agreement(const Var<Scalar>& predictions, const Var<Scalar>& outputs);

/// Per-call routing record. Logits start at zero on every call.
template <typename Scalar>
struct RoutingState {
  Tensor<Scalar> logits;     // [b,N,M] after the last update
  Tensor<Scalar> couplings;  // [b,N,M] used in the final iteration
  int iterations = 0;
  std::vector<Tensor<Scalar>> coupling_history;  // one entry per iteration
};

/// Routing by agreement over predictions [b,N,M,d]. Couplings are a softmax
/// of the logits over the output-capsule axis; the logit update is skipped on
/// the last iteration. Gradients flow through every iteration.
template <typename Scalar>
Var<Scalar> dynamic_routing(const Var<Scalar>& predictions, int iterations, RoutingState<Scalar>* state = nullptr);

// [b, dim*types, h, w] -> [b, types*h*w, dim]. Channel d*types + t at (y, x)
// becomes component d of capsule (t*h + y)*w + x.
template <typename Scalar>
Var<Scalar> capsules_from_feature_map(const Var<Scalar>& features, Index capsule_dim);

/// Convolutional primary capsules: conv2d (k=9, stride 2) to 8*types
/// channels, regrouped into 8D capsules and squashed.
template <typename Scalar>
Var<Scalar> conv_primary_caps(const Var<Scalar>& features, const Var<Scalar>& kernel, const Var<Scalar>& bias,
                              Index types);

/// Fully-connected primary capsules: flatten, one FC layer to 8*pc_count
/// outputs, reshape to [b, pc_count, 8] and squash.
template <typename Scalar>
Var<Scalar> fc_primary_caps(const Var<Scalar>& features, const Var<Scalar>& weight, const Var<Scalar>& bias,
                            Index pc_count);

}  // namespace capsbench
