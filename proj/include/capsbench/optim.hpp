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

#include <cmath>
#include <vector>

#include "capsbench/autograd.hpp"

namespace capsbench {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Parameters without a gradient are skipped.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Var<Scalar>> params, AdamOptions options = {}) : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) {
      first_.emplace_back(Tensor<Scalar>::Vector::Zero(p.value().size()));
      second_.emplace_back(Tensor<Scalar>::Vector::Zero(p.value().size()));
    }
  }

  void step() {
    ++steps_;
    const Scalar b1 = Scalar(options_.beta1), b2 = Scalar(options_.beta2);
    const Scalar correction1 = Scalar(1) - Scalar(std::pow(options_.beta1, double(steps_)));
    const Scalar correction2 = Scalar(1) - Scalar(std::pow(options_.beta2, double(steps_)));
    const Scalar lr = Scalar(options_.learning_rate), eps = Scalar(options_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      const auto& g = p.grad().vec();
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      p.mutable_value().vec().array() -=
          lr * (first_[i].array() / correction1) / ((second_[i].array() / correction2).sqrt() + eps);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  long steps() const { return steps_; }

 private:
  std::vector<Var<Scalar>> params_;
  AdamOptions options_;
  std::vector<typename Tensor<Scalar>::Vector> first_, second_;
  long steps_ = 0;
};

}  // namespace capsbench
