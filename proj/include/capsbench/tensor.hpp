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

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "capsbench/errors.hpp"

namespace capsbench {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array. Rank 0 holds a single scalar.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(Vector::Zero(checked_size(shape_))) {}

  Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != checked_size(shape_)) {
      throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                       std::to_string(values_.size()) + " values");
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Vector(Eigen::Map<const Vector>(values.begin(), Index(values.size())))) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.values_.setConstant(value);
    return t;
  }

  static Tensor scalar(Scalar value) { return full({}, value); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return Index(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(std::size_t(axis)); }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  std::span<Scalar> span() { return {values_.data(), std::size_t(values_.size())}; }
  std::span<const Scalar> span() const { return {values_.data(), std::size_t(values_.size())}; }

  Vector& vec() { return values_; }
  const Vector& vec() const { return values_; }

  MatrixMap<Scalar> matrix(Index rows, Index cols) {
    check_matrix(rows, cols);
    return MatrixMap<Scalar>(values_.data(), rows, cols);
  }
  ConstMatrixMap<Scalar> matrix(Index rows, Index cols) const {
    check_matrix(rows, cols);
    return ConstMatrixMap<Scalar>(values_.data(), rows, cols);
  }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  /// Multi-index access, row-major.
  Scalar& at(std::initializer_list<Index> idx) { return values_[offset(idx)]; }
  Scalar at(std::initializer_list<Index> idx) const { return values_[offset(idx)]; }

  Scalar item() const {
    if (values_.size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape_));
    return values_[0];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), values_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>());
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  static Index checked_size(const Shape& shape) {
    for (Index e : shape) {
      if (e < 0) throw ShapeError("negative extent in shape " + to_string(shape));
    }
    return shape_size(shape);
  }

  void check_matrix(Index rows, Index cols) const {
    if (rows * cols != size()) {
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " of tensor " + to_string(shape_));
    }
  }

  Index offset(std::initializer_list<Index> idx) const {
    if (Index(idx.size()) != rank()) throw ShapeError("index rank mismatch for " + to_string(shape_));
    Index off = 0;
    std::size_t axis = 0;
    for (Index i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  Shape shape_;
  Vector values_;
};

}  // namespace capsbench
