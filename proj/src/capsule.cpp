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

#include "capsbench/capsule.hpp"

#include <cmath>

namespace capsbench {
namespace {

template <typename Scalar>
using StridedMap = Eigen::Map<RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;
template <typename Scalar>
using ConstStridedMap = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;

}  // namespace

template <typename Scalar>
Var<Scalar> squash(const Var<Scalar>& capsules) {
  if (capsules.rank() < 1) throw ShapeError("squash needs at least rank 1");
  const Index dim = capsules.shape().back();
  const Index count = dim == 0 ? 0 : capsules.value().size() / dim;
  const Scalar eps = Scalar(kNormEpsilon);
  Tensor<Scalar> out(capsules.shape());
  auto s = capsules.value().matrix(count, dim);
  auto v = out.matrix(count, dim);
  for (Index r = 0; r < count; ++r) {
    const Scalar q = s.row(r).squaredNorm();
    const Scalar factor = q / ((Scalar(1) + q) * std::sqrt(q + eps));
    v.row(r) = factor * s.row(r);
  }
  return record<Scalar>(std::move(out), {capsules}, [count, dim, eps](Node<Scalar>& self) {
    auto& in = *self.inputs[0];
    auto s = in.value.matrix(count, dim);
    auto gv = self.grad.matrix(count, dim);
    auto gs = in.grad_buffer().matrix(count, dim);
    for (Index r = 0; r < count; ++r) {
      const Scalar q = s.row(r).squaredNorm();
      const Scalar g = Scalar(1) / ((Scalar(1) + q) * std::sqrt(q + eps));
      const Scalar factor = q * g;
      // d factor / dq, written without the 1/q term so it stays finite at 0
      const Scalar dfactor = g * (Scalar(1) - q / (Scalar(1) + q) - q / (Scalar(2) * (q + eps)));
      const Scalar proj = s.row(r).dot(gv.row(r));
      gs.row(r) += factor * gv.row(r) + (Scalar(2) * dfactor * proj) * s.row(r);
    }
  });
}

template <typename Scalar>
Var<Scalar> predict(const Var<Scalar>& capsules, const Var<Scalar>& transforms) {
  if (capsules.rank() != 3 || transforms.rank() != 4) {
    throw ShapeError("predict expects u [b,N,in] and W [N,M,in,out], got " + to_string(capsules.shape()) + " and " +
                     to_string(transforms.shape()));
  }
  const Index b = capsules.dim(0), n = capsules.dim(1), in = capsules.dim(2);
  const Index m = transforms.dim(1), od = transforms.dim(3);
  if (transforms.dim(0) != n || transforms.dim(2) != in) {
    throw ShapeError("predict: W " + to_string(transforms.shape()) + " does not match capsules " +
                     to_string(capsules.shape()));
  }
  const Index row = m * od;
  // W[i] is stored [M][in][out]; gathers it as an [in, M*out] matrix so
  // each input capsule needs one GEMM.
  auto gather_rows = [=](const Scalar* w, Index i, RowMatrix<Scalar>& dst) {
    for (Index j = 0; j < m; ++j) dst.middleCols(j * od, od) = ConstMatrixMap<Scalar>(w + (i * m + j) * in * od, in, od);
  };
  Tensor<Scalar> out({b, n, m, od});
  const Scalar* u = capsules.value().data();
  RowMatrix<Scalar> wi(in, row);
  for (Index i = 0; i < n; ++i) {
    gather_rows(transforms.value().data(), i, wi);
    ConstStridedMap<Scalar> ui(u + i * in, b, in, Eigen::OuterStride<>(n * in));
    StridedMap<Scalar> yi(out.data() + i * row, b, row, Eigen::OuterStride<>(n * row));
    yi.noalias() = ui * wi;
  }
  return record<Scalar>(std::move(out), {capsules, transforms}, [=](Node<Scalar>& self) {
    auto& un = *self.inputs[0];
    auto& wn = *self.inputs[1];
    RowMatrix<Scalar> wi(in, row), gwi(in, row);
    for (Index i = 0; i < n; ++i) {
      ConstStridedMap<Scalar> gy(self.grad.data() + i * row, b, row, Eigen::OuterStride<>(n * row));
      if (wn.requires_grad) {
        ConstStridedMap<Scalar> ui(un.value.data() + i * in, b, in, Eigen::OuterStride<>(n * in));
        gwi.noalias() = ui.transpose() * gy;
        Scalar* gw = wn.grad_buffer().data();
        for (Index j = 0; j < m; ++j) MatrixMap<Scalar>(gw + (i * m + j) * in * od, in, od) += gwi.middleCols(j * od, od);
      }
      if (un.requires_grad) {
        gather_rows(wn.value.data(), i, wi);
        StridedMap<Scalar>(un.grad_buffer().data() + i * in, b, in, Eigen::OuterStride<>(n * in)).noalias() +=
            gy * wi.transpose();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& couplings, const Var<Scalar>& predictions) {
  if (predictions.rank() != 4 || couplings.rank() != 3) throw ShapeError("weighted_sum expects c [b,N,M], u_hat [b,N,M,d]");
  const Index b = predictions.dim(0), n = predictions.dim(1), m = predictions.dim(2), d = predictions.dim(3);
  if (couplings.shape() != Shape{b, n, m}) {
    throw ShapeError("weighted_sum: couplings " + to_string(couplings.shape()) + " vs predictions " +
                     to_string(predictions.shape()));
  }
  Tensor<Scalar> out({b, m, d});
  const Scalar* c = couplings.value().data();
  const Scalar* u = predictions.value().data();
  for (Index bi = 0; bi < b; ++bi) {
    MatrixMap<Scalar> s(out.data() + bi * m * d, m, d);
    for (Index i = 0; i < n; ++i) {
      ConstMatrixMap<Scalar> ui(u + (bi * n + i) * m * d, m, d);
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> ci(c + (bi * n + i) * m, m);
      s += ci.asDiagonal() * ui;
    }
  }
  return record<Scalar>(std::move(out), {couplings, predictions}, [=](Node<Scalar>& self) {
    auto& cn = *self.inputs[0];
    auto& un = *self.inputs[1];
    for (Index bi = 0; bi < b; ++bi) {
      ConstMatrixMap<Scalar> gs(self.grad.data() + bi * m * d, m, d);
      for (Index i = 0; i < n; ++i) {
        const Index base = (bi * n + i) * m;
        if (cn.requires_grad) {
          ConstMatrixMap<Scalar> ui(un.value.data() + base * d, m, d);
          Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(cn.grad_buffer().data() + base, m) +=
              ui.cwiseProduct(gs).rowwise().sum();
        }
        if (un.requires_grad) {
          Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> ci(cn.value.data() + base, m);
          MatrixMap<Scalar>(un.grad_buffer().data() + base * d, m, d) += ci.asDiagonal() * gs;
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> agreement(const Var<Scalar>& predictions, const Var<Scalar>& outputs) {
  if (predictions.rank() != 4 || outputs.rank() != 3) throw ShapeError("agreement expects u_hat [b,N,M,d], v [b,M,d]");
  const Index b = predictions.dim(0), n = predictions.dim(1), m = predictions.dim(2), d = predictions.dim(3);
  if (outputs.shape() != Shape{b, m, d}) {
    throw ShapeError("agreement: outputs " + to_string(outputs.shape()) + " vs predictions " +
                     to_string(predictions.shape()));
  }
  Tensor<Scalar> out({b, n, m});
  for (Index bi = 0; bi < b; ++bi) {
    ConstMatrixMap<Scalar> v(outputs.value().data() + bi * m * d, m, d);
    for (Index i = 0; i < n; ++i) {
      const Index base = (bi * n + i) * m;
      ConstMatrixMap<Scalar> ui(predictions.value().data() + base * d, m, d);
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(out.data() + base, m) = ui.cwiseProduct(v).rowwise().sum();
    }
  }
  return record<Scalar>(std::move(out), {predictions, outputs}, [=](Node<Scalar>& self) {
    auto& un = *self.inputs[0];
    auto& vn = *self.inputs[1];
    for (Index bi = 0; bi < b; ++bi) {
      ConstMatrixMap<Scalar> v(vn.value.data() + bi * m * d, m, d);
      for (Index i = 0; i < n; ++i) {
        const Index base = (bi * n + i) * m;
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> ga(self.grad.data() + base, m);
        if (un.requires_grad) MatrixMap<Scalar>(un.grad_buffer().data() + base * d, m, d) += ga.asDiagonal() * v;
        if (vn.requires_grad) {
          ConstMatrixMap<Scalar> ui(un.value.data() + base * d, m, d);
          MatrixMap<Scalar>(vn.grad_buffer().data() + bi * m * d, m, d) += ga.asDiagonal() * ui;
        }
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> dynamic_routing(const Var<Scalar>& predictions, int iterations, RoutingState<Scalar>* state) {
  if (iterations < 1) throw ContractError("dynamic_routing needs at least one iteration");
  if (predictions.rank() != 4) throw ShapeError("dynamic_routing expects predictions [b,N,M,d]");
  const Shape logit_shape{predictions.dim(0), predictions.dim(1), predictions.dim(2)};
  auto logits = Var<Scalar>::constant(Tensor<Scalar>(logit_shape));
  Var<Scalar> outputs;
  if (state) {
    state->iterations = iterations;
    state->coupling_history.clear();
  }
  for (int r = 0; r < iterations; ++r) {
    auto couplings = softmax(logits, 2);
    if (state) state->coupling_history.push_back(couplings.value());
    outputs = squash(weighted_sum(couplings, predictions));
    if (state && r + 1 == iterations) state->couplings = couplings.value();
    if (r + 1 < iterations) logits = add(logits, agreement(predictions, outputs));
  }
  if (state) state->logits = logits.value();
  return outputs;
}

template <typename Scalar>
Var<Scalar> capsules_from_feature_map(const Var<Scalar>& features, Index capsule_dim) {
  if (features.rank() != 4) throw ShapeError("capsules_from_feature_map expects [b,c,h,w]");
  const Index b = features.dim(0), c = features.dim(1), h = features.dim(2), w = features.dim(3);
  if (capsule_dim < 1 || c % capsule_dim != 0) {
    throw ShapeError("channel count " + std::to_string(c) + " not divisible by capsule dim " + std::to_string(capsule_dim));
  }
  const Index types = c / capsule_dim, plane = h * w, caps = types * plane;
  // Visits (input offset, output offset) pairs; shared by forward and backward.
  auto for_each_pair = [=](auto&& visit) {
    for (Index bi = 0; bi < b; ++bi) {
      for (Index d = 0; d < capsule_dim; ++d) {
        for (Index t = 0; t < types; ++t) {
          const Index in = (bi * c + d * types + t) * plane;
          const Index out = (bi * caps + t * plane) * capsule_dim + d;
          for (Index p = 0; p < plane; ++p) visit(in + p, out + p * capsule_dim);
        }
      }
    }
  };
  Tensor<Scalar> out({b, caps, capsule_dim});
  const Scalar* src = features.value().data();
  Scalar* dst = out.data();
  for_each_pair([&](Index i, Index o) { dst[o] = src[i]; });
  return record<Scalar>(std::move(out), {features}, [for_each_pair](Node<Scalar>& self) {
    Scalar* gx = self.inputs[0]->grad_buffer().data();
    const Scalar* gy = self.grad.data();
    for_each_pair([&](Index i, Index o) { gx[i] += gy[o]; });
  });
}

template <typename Scalar>
Var<Scalar> conv_primary_caps(const Var<Scalar>& features, const Var<Scalar>& kernel, const Var<Scalar>& bias,
                              Index types) {
  if (kernel.rank() != 4 || kernel.dim(0) != kPrimaryCapsuleDim * types) {
    throw ShapeError("conv_primary_caps: kernel " + to_string(kernel.shape()) + " does not give " +
                     std::to_string(kPrimaryCapsuleDim * types) + " channels");
  }
  if (features.rank() == 4 && (features.dim(2) < kPrimaryKernel || features.dim(3) < kPrimaryKernel)) {
    throw GeometryError("conv_primary_caps: feature map " + std::to_string(features.dim(2)) + "x" +
                        std::to_string(features.dim(3)) + " smaller than the 9x9 kernel");
  }
  auto maps = conv2d(features, kernel, bias, kPrimaryStride);
  return squash(capsules_from_feature_map(maps, kPrimaryCapsuleDim));
}

template <typename Scalar>
Var<Scalar> fc_primary_caps(const Var<Scalar>& features, const Var<Scalar>& weight, const Var<Scalar>& bias,
                            Index pc_count) {
  const Index b = features.dim(0);
  Index flat = 1;
  for (Index axis = 1; axis < features.rank(); ++axis) flat *= features.dim(axis);
  if (weight.rank() != 2 || weight.dim(1) != kPrimaryCapsuleDim * pc_count) {
    throw ShapeError("fc_primary_caps: weight " + to_string(weight.shape()) + " does not give " +
                     std::to_string(kPrimaryCapsuleDim * pc_count) + " outputs");
  }
  auto hidden = fully_connected(reshape(features, {b, flat}), weight, bias);
  return squash(reshape(hidden, {b, pc_count, kPrimaryCapsuleDim}));
}

#define CAPSBENCH_INSTANTIATE_CAPSULE(S)                                                              \
  template Var<S> squash<S>(const Var<S>&);                                                           \
  template Var<S> predict<S>(const Var<S>&, const Var<S>&);                                           \
  template Var<S> weighted_sum<S>(const Var<S>&, const Var<S>&);                                      \
  template Var<S> agreement<S>(const Var<S>&, const Var<S>&);                                         \
  template Var<S> dynamic_routing<S>(const Var<S>&, int, RoutingState<S>*);                           \
  template Var<S> capsules_from_feature_map<S>(const Var<S>&, Index);                                 \
  template Var<S> conv_primary_caps<S>(const Var<S>&, const Var<S>&, const Var<S>&, Index);           \
  template Var<S> fc_primary_caps<S>(const Var<S>&, const Var<S>&, const Var<S>&, Index);

CAPSBENCH_INSTANTIATE_CAPSULE(float)
CAPSBENCH_INSTANTIATE_CAPSULE(double)

}  // namespace capsbench
