// Copyright 2026 The cfeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

namespace cfeval {

// Cosine of the angle between two vectors; 0 when either has zero norm.
template <typename A, typename B>
typename A::Scalar cosine_similarity(const Eigen::MatrixBase<A>& a,
                                     const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

// Entry (i, j) is the cosine between column i of `a` and column j of `b`;
// 0 when either column is zero. Raw dot products are divided by the norm
// product afterwards, so 0/1 columns get exact dots and exact ties.
template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, Eigen::Dynamic> column_cosine(
    const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = a.transpose() * b;
  const auto na = a.colwise().norm().eval();
  const auto nb = b.colwise().norm().eval();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const Scalar d = na(i) * nb(j);
      out(i, j) = d == Scalar(0) ? Scalar(0) : out(i, j) / d;
    }
  }
  return out;
}

// Entry (i, j) is the Euclidean distance between column i of `a` and column j
// of `b`.
template <typename A, typename B>
Eigen::Matrix<typename A::Scalar, Eigen::Dynamic, Eigen::Dynamic> column_distances(
    const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) d(i, j) = (a.col(i) - b.col(j)).norm();
  }
  return d;
}

}  // namespace cfeval
