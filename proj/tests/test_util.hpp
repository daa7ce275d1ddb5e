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

#include <cstdint>
#include <random>

#include "capsbench/ops.hpp"

namespace capsbench::testing {

template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(dist(rng));
  return t;
}

// sum(y * weights) for a fixed random weighting, so every output element
// gets a distinct upstream gradient.
template <typename Scalar>
Var<Scalar> probe(const Var<Scalar>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, Var<Scalar>::constant(random_tensor<Scalar>(y.shape(), rng))));
}

}  // namespace capsbench::testing
