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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "capsbench/autograd.hpp"

namespace capsbench {

struct GradCheckOptions {
  double step = 1e-3;
  // Checks every coordinate when 0, otherwise a seeded sample of this many.
  Index max_coordinates = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<Index> check_coordinates(Index size, const GradCheckOptions& options) {
  std::vector<Index> coords(static_cast<std::size_t>(size));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (options.max_coordinates > 0 && options.max_coordinates < size) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(options.max_coordinates));
    std::sort(coords.begin(), coords.end());
  }
  return coords;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace detail

/// Max relative error between the reverse-mode gradient of `loss()` w.r.t.
/// `param` and a central difference obtained by perturbing `param` in place.
/// Always runs in double precision.
template <typename Loss>
double grad_check_parameter(Var<double>& param, Loss&& loss, const GradCheckOptions& options = {}) {
  param.zero_grad();
  backward(loss());
  const Tensor<double> analytic = param.has_grad() ? param.grad() : Tensor<double>(param.shape());
  param.zero_grad();

  NoGradGuard no_grad;
  double worst = 0.0;
  Tensor<double>& value = param.mutable_value();
  for (Index i : detail::check_coordinates(value.size(), options)) {
    const double saved = value[i];
    value[i] = saved + options.step;
    const double up = loss().value().item();
    value[i] = saved - options.step;
    const double down = loss().value().item();
    value[i] = saved;
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2.0 * options.step)));
  }
  return worst;
}

/// Checks a scalar function of one tensor at `point`.
template <typename Fn>
double grad_check(Fn&& f, const Tensor<double>& point, const GradCheckOptions& options = {}) {
  auto param = Var<double>::parameter(point);
  return grad_check_parameter(param, [&] { return f(param); }, options);
}

template <typename Fn>
double grad_check(Fn&& f, const Tensor<double>& point, double step) {
  GradCheckOptions options;
  options.step = step;
  return grad_check(std::forward<Fn>(f), point, options);
}

}  // namespace capsbench
