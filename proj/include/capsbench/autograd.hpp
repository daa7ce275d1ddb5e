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

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "capsbench/tensor.hpp"

namespace capsbench {

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  // Empty until something flows into it.
  Tensor<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the grads of `inputs`.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  Tensor<Scalar>& grad_buffer() {
    if (grad.shape() != value.shape() || grad.size() != value.size()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
};

/// Handle to a node in a dynamically recorded computation graph.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<Scalar> value) { return make_leaf(std::move(value), false); }
  static Var parameter(Tensor<Scalar> value) { return make_leaf(std::move(value), true); }

  const Tensor<Scalar>& value() const { return node_->value; }
  // Parameters are updated in place by the optimizer between forward passes.
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  Index rank() const { return node_->value.rank(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->grad.shape() == shape(); }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor<Scalar>(); }

  Node<Scalar>* node() const { return node_.get(); }
  const std::shared_ptr<Node<Scalar>>& shared() const { return node_; }
  explicit operator bool() const { return bool(node_); }

 private:
  static Var make_leaf(Tensor<Scalar> value, bool requires_grad) {
    auto node = std::make_shared<Node<Scalar>>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(std::move(node));
  }

  std::shared_ptr<Node<Scalar>> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(enabled()) { enabled() = false; }
  ~NoGradGuard() { enabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool& enabled() {
    thread_local bool recording = true;
    return recording;
  }

 private:
  bool previous_;
};

/// Wraps an op result. The graph edge is kept only when some input needs a
/// gradient and recording is enabled.
template <typename Scalar>
Var<Scalar> record(Tensor<Scalar> value, std::vector<Var<Scalar>> inputs,
                   std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs && NoGradGuard::enabled()) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(node));
}

/// Nodes reachable from `root` that require a gradient, inputs before consumers.
template <typename Scalar>
std::vector<Node<Scalar>*> topological_order(const Var<Scalar>& root) {
  std::vector<Node<Scalar>*> order;
  if (!root.requires_grad()) return order;
  std::unordered_set<Node<Scalar>*> visited{root.node()};
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{root.node(), 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Scalar>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

/// Reverse-mode sweep from a scalar root. Leaf gradients accumulate across
/// calls; interior gradients are rebuilt each time.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (root.value().size() != 1) {
    throw ContractError("backward root must be scalar, got shape " + to_string(root.shape()));
  }
  auto order = topological_order(root);
  if (order.empty()) return;
  for (auto* node : order) {
    if (!node->is_leaf()) node->grad = Tensor<Scalar>();
  }
  root.node()->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* node = *it;
    if (node->is_leaf() || node->grad.size() != node->value.size()) continue;
    node->backward(*node);
    // interior grads are not needed once propagated
    if (node != root.node()) node->grad = Tensor<Scalar>();
  }
}

}  // namespace capsbench
