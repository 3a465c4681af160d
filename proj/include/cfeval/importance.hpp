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

// Per-instance importance scores. An instance that splits a model set into
// good and bad answers discriminates between models and scores high.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfeval/errors.hpp"
#include "cfeval/store.hpp"

namespace cfeval {

enum class ImportanceKind { kVariance, kBinaryCount };

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Unbiased sample variance of every column: 1/(M-1) * sum_m (x_m - mean)^2.
// Each column is summed in sorted order, so columns holding the same values
// in any row order get bit-identical scores and ties stay exact.
template <typename Derived>
Vector<typename Derived::Scalar> column_variance(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() < 2) throw ArgumentError("variance importance needs at least 2 model rows");
  const Scalar denom = static_cast<Scalar>(m.rows() - 1);
  Vector<Scalar> out(m.cols());
  std::vector<Scalar> col(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) col[static_cast<std::size_t>(i)] = m(i, j);
    std::sort(col.begin(), col.end());
    Scalar sum(0);
    for (Scalar v : col) sum += v;
    const Scalar mean = sum / static_cast<Scalar>(m.rows());
    Scalar ss(0);
    for (Scalar v : col) ss += (v - mean) * (v - mean);
    out(j) = ss / denom;
  }
  return out;
}

// Cap used where the binary-count score divides by zero (equal counts).
inline double binary_importance_cap(Eigen::Index num_models) {
  return 2.0 * static_cast<double>(num_models);
}

// 1 / |#correct - #incorrect| per column; binary_importance_cap(M) when the
// counts are equal. Throws on entries other than 0 and 1.
template <typename Derived>
Vector<typename Derived::Scalar> column_binary_importance(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() < 1) throw ArgumentError("binary importance needs at least 1 model row");
  Vector<Scalar> out(m.cols());
  const auto cap = static_cast<Scalar>(binary_importance_cap(m.rows()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const Scalar v = m(i, j);
      if (v == Scalar(1)) {
        ++ones;
      } else if (v != Scalar(0)) {
        throw DataError("non-binary value in binary importance (row " + std::to_string(i) +
                        ", column " + std::to_string(j) + ")");
      }
    }
    const auto diff = std::abs(2 * ones - m.rows());
    out(j) = diff == 0 ? cap : Scalar(1) / static_cast<Scalar>(diff);
  }
  return out;
}

template <typename Derived>
Vector<typename Derived::Scalar> column_importance(const Eigen::MatrixBase<Derived>& m,
                                                   ImportanceKind kind) {
  return kind == ImportanceKind::kVariance ? column_variance(m)
                                           : column_binary_importance(m);
}

struct ImportanceVector {
  std::string task_id;
  Eigen::VectorXd scores;
  std::vector<std::string> model_set_ids;
};

// Scores over the rows `model_rows` of `matrix` (all columns).
ImportanceVector variance_importance(const EvalMatrix& matrix,
                                     std::span<const Eigen::Index> model_rows);
ImportanceVector binary_importance(const EvalMatrix& matrix,
                                   std::span<const Eigen::Index> model_rows);

// weight_alpha * base + (1 - weight_alpha) * similar.
ImportanceVector combined_importance(const ImportanceVector& base,
                                     const ImportanceVector& similar, double weight_alpha);

// Column indices of the `k` largest scores, descending, ties by ascending
// index. Columns whose mask entry is true are skipped.
std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& scores, std::size_t k,
                                        const std::vector<bool>* excluded = nullptr);

}  // namespace cfeval
