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

#include <span>

#include "capsbench/ops.hpp"

namespace capsbench {

struct MarginLossParams {
  double m_plus = 0.9;
  double m_minus = 0.1;
  // down-weighting of absent classes
  double lambda_down = 0.5;

  void validate() const;
};

/// Mean over the batch of
///   sum_k T_k max(0, m+ - |v_k|)^2 + lambda (1 - T_k) max(0, |v_k| - m-)^2.
/// `lengths` and `labels` are [b, K]; every label row must be one-hot.
template <typename Scalar>
Var<Scalar> margin_loss(const Var<Scalar>& lengths, const Tensor<Scalar>& labels, const MarginLossParams& params = {});

/// weight * sum of squared differences, averaged over the batch.
template <typename Scalar>
Var<Scalar> reconstruction_loss(const Var<Scalar>& reconstruction, const Tensor<Scalar>& images, Scalar weight);

template <typename Scalar>
Tensor<Scalar> one_hot(std::span<const Index> labels, Index num_classes);

}  // namespace capsbench
