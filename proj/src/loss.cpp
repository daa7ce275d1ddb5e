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

#include "capsbench/loss.hpp"

#include <algorithm>

namespace capsbench {

void MarginLossParams::validate() const {
  if (!(0.0 < m_minus && m_minus < m_plus && m_plus < 1.0) || !(lambda_down > 0.0)) {
    throw ConfigError("margin loss needs 0 < m- < m+ < 1 and lambda > 0");
  }
}

template <typename Scalar>
Var<Scalar> margin_loss(const Var<Scalar>& lengths, const Tensor<Scalar>& labels, const MarginLossParams& params) {
  if (lengths.rank() != 2 || labels.shape() != lengths.shape()) {
    throw ShapeError("margin_loss: lengths " + to_string(lengths.shape()) + " vs labels " + to_string(labels.shape()));
  }
  const Index b = lengths.dim(0), k = lengths.dim(1);
  auto t = labels.matrix(b, k);
  for (Index r = 0; r < b; ++r) {
    const bool binary = (t.row(r).array() == Scalar(0) || t.row(r).array() == Scalar(1)).all();
    if (!binary || t.row(r).sum() != Scalar(1)) {
      throw ContractError("margin_loss: label row " + std::to_string(r) + " is not one-hot");
    }
  }
  const Scalar m_plus = Scalar(params.m_plus), m_minus = Scalar(params.m_minus), lambda = Scalar(params.lambda_down);
  const Scalar inv_batch = b == 0 ? Scalar(0) : Scalar(1) / Scalar(b);
  const auto l = lengths.value().vec().array();
  const auto tv = labels.vec().array();
  const auto present = (m_plus - l).max(Scalar(0));
  const auto absent = (l - m_minus).max(Scalar(0));
  const Scalar total = (tv * present.square() + lambda * (Scalar(1) - tv) * absent.square()).sum() * inv_batch;

  return record<Scalar>(Tensor<Scalar>::scalar(total), {lengths}, [labels, m_plus, m_minus, lambda, inv_batch](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    const auto l = in.value.vec().array();
    const auto tv = labels.vec().array();
    const Scalar g = self.grad[0] * inv_batch;
    in.grad_buffer().vec().array() +=
        g * (Scalar(-2) * tv * (m_plus - l).max(Scalar(0)) + Scalar(2) * lambda * (Scalar(1) - tv) * (l - m_minus).max(Scalar(0)));
  });
}

template <typename Scalar>
Var<Scalar> reconstruction_loss(const Var<Scalar>& reconstruction, const Tensor<Scalar>& images, Scalar weight) {
  if (reconstruction.shape() != images.shape()) {
    throw ShapeError("reconstruction_loss: reconstruction " + to_string(reconstruction.shape()) + " vs images " +
                     to_string(images.shape()));
  }
  const Index b = images.rank() == 0 ? 1 : images.dim(0);
  const Scalar factor = b == 0 ? Scalar(0) : weight / Scalar(b);
  return scale(sum(square(sub(reconstruction, Var<Scalar>::constant(images)))), factor);
}

template <typename Scalar>
Tensor<Scalar> one_hot(std::span<const Index> labels, Index num_classes) {
  Tensor<Scalar> out({Index(labels.size()), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " outside [0," + std::to_string(num_classes) + ")");
    }
    out[Index(i) * num_classes + labels[i]] = Scalar(1);
  }
  return out;
}

#define CAPSBENCH_INSTANTIATE_LOSS(S)                                                       \
  template Var<S> margin_loss<S>(const Var<S>&, const Tensor<S>&, const MarginLossParams&); \
  template Var<S> reconstruction_loss<S>(const Var<S>&, const Tensor<S>&, S);               \
  template Tensor<S> one_hot<S>(std::span<const Index>, Index);

CAPSBENCH_INSTANTIATE_LOSS(float)
CAPSBENCH_INSTANTIATE_LOSS(double)

}  // namespace capsbench
